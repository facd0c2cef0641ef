pub mod cvae;
pub mod fingersim;
pub mod genprobe;
pub mod latentlens;
pub mod numerics;
pub mod seed;
