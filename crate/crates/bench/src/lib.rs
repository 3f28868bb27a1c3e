pub use extremum_tde;
