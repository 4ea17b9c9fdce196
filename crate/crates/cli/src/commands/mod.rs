pub mod eval;
pub mod inspect;
pub mod perturb;
pub mod prepare;
pub mod score;
pub mod train;
