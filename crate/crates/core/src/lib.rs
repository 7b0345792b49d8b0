pub mod articulation;
pub mod assembly;
pub mod contact;
pub mod dynamics;
pub mod geometry;
pub mod linalg;
pub mod par;
pub mod scene;
pub mod simapi;
pub mod solver;
