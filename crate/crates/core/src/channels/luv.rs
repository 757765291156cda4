//! sRGB to CIE LUV conversion with affine rescaling to `[0, 1]`.

use super::{ChannelError, Plane};
use crate::imgio::Image;

// sRGB primaries (D65) to XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// CIE constants for the L* cube-root knee.
const CIE_EPSILON: f64 = 216.0 / 24389.0;
const CIE_KAPPA: f64 = 24389.0 / 27.0;

// Affine ranges covering the full 8-bit sRGB gamut: L in [0, 100],
// u in [-83.08, 175.02], v in [-134.10, 107.40].
pub const L_SCALE: f64 = 100.0;
pub const U_MIN: f64 = -84.0;
pub const U_MAX: f64 = 176.0;
pub const V_MIN: f64 = -135.0;
pub const V_MAX: f64 = 108.0;

fn srgb_to_linear(c: u8) -> f64 {
    let c = f64::from(c) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_table() -> [f64; 256] {
    let mut t = [0.0; 256];
    for (i, v) in t.iter_mut().enumerate() {
        *v = srgb_to_linear(i as u8);
    }
    t
}

fn white_point() -> (f64, f64, f64) {
    let row = |r: usize| RGB_TO_XYZ[r].iter().sum::<f64>();
    let (xn, yn, zn) = (row(0), row(1), row(2));
    let d = xn + 15.0 * yn + 3.0 * zn;
    (yn, 4.0 * xn / d, 9.0 * yn / d)
}

/// Converts one linear RGB triple to rescaled `(L, U, V)`.
pub fn linear_rgb_to_luv(rgb: [f64; 3]) -> [f64; 3] {
    let (yn, un, vn) = white_point();
    let xyz: Vec<f64> = RGB_TO_XYZ
        .iter()
        .map(|row| row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2])
        .collect();
    let y = xyz[1] / yn;
    let l = if y > CIE_EPSILON {
        116.0 * y.cbrt() - 16.0
    } else {
        CIE_KAPPA * y
    };
    let d = xyz[0] + 15.0 * xyz[1] + 3.0 * xyz[2];
    let (u, v) = if d > 0.0 {
        (
            13.0 * l * (4.0 * xyz[0] / d - un),
            13.0 * l * (9.0 * xyz[1] / d - vn),
        )
    } else {
        (0.0, 0.0)
    };
    [
        l / L_SCALE,
        (u - U_MIN) / (U_MAX - U_MIN),
        (v - V_MIN) / (V_MAX - V_MIN),
    ]
}

pub fn rgb_to_luv(img: &Image) -> Result<[Plane; 3], ChannelError> {
    if img.planes() != 3 {
        return Err(ChannelError::NotColorImage { planes: img.planes() });
    }
    let (w, h) = (img.width(), img.height());
    let lut = linear_table();
    let mut out = [Plane::zeros(w, h), Plane::zeros(w, h), Plane::zeros(w, h)];
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        let luv = linear_rgb_to_luv([lut[px[0] as usize], lut[px[1] as usize], lut[px[2] as usize]]);
        for c in 0..3 {
            out[c].data_mut()[i] = luv[c];
        }
    }
    Ok(out)
}
