pub use lakelet_core;
