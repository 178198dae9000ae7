// Crate-internal imports shared by every module. `Float` supplies the libm-backed
// math methods on f64 when std is not linked.
#[allow(unused_imports)]
pub(crate) use alloc::{borrow::ToOwned, boxed::Box, format, string::String, string::ToString, vec, vec::Vec};
#[allow(unused_imports)]
pub(crate) use num_traits::Float;

pub(crate) use crate::{Complex64, Error, Result, Vec3};
