//! Time grids, sampled paths, Hölder calculus and second-level rough paths.
//!
//! Everything here lives on a uniform grid `t_i = i T / N`. Hölder quantities
//! are exact suprema over grid pairs, so they are lower bounds for the
//! continuous-time constants of the sampled process, not estimates of them.

mod holder;
mod io;
mod path;
mod rough_path;
mod table;

pub use holder::{holder_norm, holder_norm_range, HoelderReport};
pub(crate) use holder::pair_sup as pair_sup_public;
pub(crate) use io::{field, header_fields, read_rough_path_from, write_row, Lines};
pub use io::{read_rough_path, write_rough_path, DriverMeta, RoughPathFile};
pub use path::{Grid, Path};
pub use rough_path::{enhance_piecewise_linear, RoughPath, ScalingCheck};
pub use table::{chen_defect, PairTable};
