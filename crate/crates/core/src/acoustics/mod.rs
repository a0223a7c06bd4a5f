//! Simulated acoustic environments: shoebox rooms, linear arrays, image-method
//! impulse responses, far-field steering vectors and diffuse noise fields.

mod array;
mod bank;
mod diffuse;
mod room;

pub use array::{steering_vector, ula, ArrayGeometry, SourcePlacement};
pub use bank::{BankEntry, BankPlan, RirBank, RirKey, RirMeta};
pub use diffuse::{babble_like_noise, diffuse_noise, NoiseField};
pub use room::{image_method_rir, reflection_coefficient, Rir, RoomConfig};

/// A point in room coordinates, metres.
pub type Point3 = [f64; 3];

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}
