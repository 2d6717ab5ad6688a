pub mod complex;
pub mod covering;
pub mod cz;
pub mod equivariant;
pub mod f2;
pub mod ode;
pub mod orbits;
pub mod par;
pub mod symplectic;
