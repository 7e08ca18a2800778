pub mod casimir;
pub mod darboux;
pub mod dynamics;
pub mod expr;
pub mod family;
pub mod numeric;
pub mod presets;
pub mod psi;
pub mod rational;
pub mod verify;
