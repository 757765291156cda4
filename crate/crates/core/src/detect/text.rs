//! Detection list text format: `image_path x y w h score` per line, reals
//! with 6 significant digits. Paths may contain spaces; the last five
//! fields are numeric.

use super::{DetectError, Detection};

/// A parsed detection line.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    pub image: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

/// `v` with `digits` significant digits, without trailing zeros, switching
/// to exponent notation outside `[1e-5, 1e6)` like C's `%g`.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{exp}", trim(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

pub fn format_detections(image: &str, dets: &[Detection]) -> String {
    let mut s = String::new();
    for d in dets {
        let f = |v: f64| format_sig(v, 6);
        s.push_str(&format!("{image} {} {} {} {} {}\n", f(d.x), f(d.y), f(d.w), f(d.h), f(d.score)));
    }
    s
}

pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>, DetectError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = || DetectError::Format {
            line: i + 1,
            content: line.to_string(),
        };
        let mut fields = t.rsplitn(6, char::is_whitespace);
        let mut nums = [0.0; 5];
        for slot in nums.iter_mut().rev() {
            *slot = fields.next().and_then(|f| f.parse::<f64>().ok()).filter(|v| v.is_finite()).ok_or_else(bad)?;
        }
        let image = fields.next().map(str::trim_end).filter(|p| !p.is_empty()).ok_or_else(bad)?;
        let [x, y, w, h, score] = nums;
        if !(w > 0.0 && h > 0.0) {
            return Err(bad());
        }
        out.push(DetectionRecord {
            image: image.to_string(),
            x,
            y,
            w,
            h,
            score,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(1.0, 6), "1");
        assert_eq!(format_sig(123.456789, 6), "123.457");
        assert_eq!(format_sig(-0.000123456789, 6), "-0.000123457");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(format_sig(1e-7, 6), "1e-7");
        assert_eq!(format_sig(999999.6, 6), "1e6");
        assert_eq!(format_sig(16.0, 6), "16");
    }

    #[test]
    fn round_trip_with_spaces_in_path() {
        let d = Detection {
            x: 1.5,
            y: 2.0,
            w: 32.0,
            h: 64.25,
            score: -0.123456789,
            scale: 1.0,
        };
        let text = format_detections("dir/my image.ppm", &[d]);
        assert_eq!(text, "dir/my image.ppm 1.5 2 32 64.25 -0.123457\n");
        let recs = parse_detections(&text).unwrap();
        assert_eq!(recs[0].image, "dir/my image.ppm");
        assert_eq!((recs[0].x, recs[0].h, recs[0].score), (1.5, 64.25, -0.123457));
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_detections("a 1 2 3\n").is_err());
        assert!(parse_detections("a 1 2 0 4 5\n").is_err());
        assert!(parse_detections("1 2 3 4 5\n").is_err());
        assert!(parse_detections("# comment\n\n").unwrap().is_empty());
    }
}
