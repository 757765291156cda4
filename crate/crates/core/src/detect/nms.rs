use super::Detection;

/// Overlap measure used by NMS.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overlap {
    /// Intersection over the smaller box's area.
    MinArea,
    /// Intersection over union.
    Iou,
}

impl Overlap {
    pub fn name(self) -> &'static str {
        match self {
            Overlap::MinArea => "min",
            Overlap::Iou => "iou",
        }
    }
}

impl std::str::FromStr for Overlap {
    type Err = super::DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" | "min_area" => Ok(Overlap::MinArea),
            "iou" => Ok(Overlap::Iou),
            _ => Err(super::DetectError::InvalidConfig(format!("unknown overlap mode {s:?}"))),
        }
    }
}

pub fn overlap(a: &Detection, b: &Detection, mode: Overlap) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    match mode {
        Overlap::MinArea => inter / a.area().min(b.area()),
        Overlap::Iou => inter / (a.area() + b.area() - inter),
    }
}

/// Greedy suppression in (score desc, x asc, y asc) order: a box is dropped
/// when its overlap with any kept box exceeds `threshold`. Output keeps
/// that order.
pub fn nms(dets: &[Detection], threshold: f64, mode: Overlap) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    let mut kept: Vec<Detection> = Vec::new();
    for d in order {
        if kept.iter().all(|k| overlap(k, d, mode) <= threshold) {
            kept.push(*d);
        }
    }
    kept
}
