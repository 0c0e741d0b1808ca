//! Breast phantom construction, finite-element bioheat solution, microwave
//! radiometry and synthetic cohort generation.

pub mod bioheat;
pub mod cohort;
pub mod geometry;
pub mod mesh;
pub mod phantom;
pub mod quadrature;
pub mod radiometry;
pub mod sparse;
pub mod tissue;
pub mod vtk;

pub use geometry::Vec3;
pub use mesh::{tetrahedralize, BoundaryFace, BoundaryKind, Mesh, MeshError};
pub use phantom::{build_phantom, measurement_points, BreastPhantom, PhantomError, PhantomSpec};
pub use tissue::{default_tissue_properties, PropertyTable, TissueProperties, TissueType, VariabilitySpec};
