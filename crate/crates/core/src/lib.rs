pub mod autodiff;
pub mod graph_io;
pub mod layers;
pub mod pooling;
pub mod train;
