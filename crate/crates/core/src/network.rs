//! The growing vessel network: every trajectory segment ever laid, carried
//! as a speed-weighted one-dimensional measure. Segments are never removed;
//! death only stops a tip from extending its vessel.

use crate::geom::{self, Vect};
use crate::kernels::Kernel;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct Segment {
    pub start: Vect,
    pub end: Vect,
    /// Tip speed at traversal; the weight of the segment in the network
    /// measure.
    pub speed_weight: f64,
    pub owner_tip: u64,
    pub t0: f64,
    pub t1: f64,
}

impl Segment {
    #[inline]
    pub fn midpoint(&self) -> Vect {
        geom::lerp(&self.start, &self.end, 0.5)
    }

    /// Time length of the traversal.
    #[inline]
    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Contribution to a tip's accumulated arc-speed integral.
    #[inline]
    pub fn arc_weight(&self) -> f64 {
        self.speed_weight * self.duration()
    }
}

#[derive(Debug, Clone, Default)]
struct TipVessel {
    segments: Vec<u32>,
    /// Running arc-speed integral of this tip's vessel.
    arc_total: f64,
}

#[derive(Debug, Clone)]
pub struct VesselNetwork {
    pub segments: Vec<Segment>,
    /// Spatial hash with cell size equal to the anastomosis kernel radius.
    buckets: HashMap<[i64; 3], Vec<u32>>,
    bucket_size: f64,
    per_tip: HashMap<u64, TipVessel>,
    dim: usize,
}

impl VesselNetwork {
    pub fn new(bucket_size: f64, dim: usize) -> Self {
        VesselNetwork {
            segments: Vec::new(),
            buckets: HashMap::new(),
            bucket_size: bucket_size.max(1e-12),
            per_tip: HashMap::new(),
            dim,
        }
    }

    #[inline]
    fn bucket_of(&self, x: &Vect) -> [i64; 3] {
        let mut b = [0i64; 3];
        for k in 0..self.dim {
            b[k] = (x[k] / self.bucket_size).floor() as i64;
        }
        b
    }

    pub fn push(&mut self, seg: Segment) {
        let id = self.segments.len() as u32;
        let b0 = self.bucket_of(&seg.start);
        let b1 = self.bucket_of(&seg.end);
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..3 {
            lo[k] = b0[k].min(b1[k]);
            hi[k] = b0[k].max(b1[k]);
        }
        let mut idx = lo;
        loop {
            self.buckets.entry(idx).or_default().push(id);
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
                k += 1;
                if k == 3 {
                    break;
                }
            }
            if k == 3 {
                break;
            }
        }
        let entry = self.per_tip.entry(seg.owner_tip).or_default();
        entry.segments.push(id);
        entry.arc_total += seg.arc_weight();
        self.segments.push(seg);
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Total time-weighted length laid down so far, summed over tips.
    pub fn total_arc(&self) -> f64 {
        self.per_tip.values().map(|t| t.arc_total).sum()
    }

    /// Accumulated arc-speed integral of one tip's vessel.
    pub fn tip_arc(&self, tip: u64) -> f64 {
        self.per_tip.get(&tip).map_or(0.0, |t| t.arc_total)
    }

    /// Tips that own at least one segment, in id order.
    pub fn tips_with_vessels(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.per_tip.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    /// Scaled network density `(1/N) (K2 * network)(x)`: midpoint quadrature
    /// of the kernel along every segment within reach of `x`. `exclude`
    /// optionally drops segments of one owner laid after a cutoff time.
    pub fn density(&self, x: &Vect, k2: &Kernel, n_scale: usize, exclude: Option<(u64, f64)>) -> f64 {
        debug_assert!(k2.support_radius <= self.bucket_size + 1e-12);
        let center = self.bucket_of(x);
        let mut acc = 0.0;
        let mut seen: Vec<u32> = Vec::new();
        let reach = 1i64;
        let mut offs = [-reach; 3];
        let active: Vect = {
            let mut a = [0.0; 3];
            for k in 0..self.dim {
                a[k] = 1.0;
            }
            a
        };
        loop {
            let mut b = center;
            for k in 0..3 {
                if active[k] > 0.0 {
                    b[k] += offs[k];
                }
            }
            if let Some(ids) = self.buckets.get(&b) {
                seen.extend_from_slice(ids);
            }
            let mut k = 0;
            loop {
                offs[k] += 1;
                if offs[k] <= reach {
                    break;
                }
                offs[k] = -reach;
                k += 1;
                if k == 3 {
                    break;
                }
            }
            if k == 3 {
                break;
            }
        }
        seen.sort_unstable();
        seen.dedup();
        for id in seen {
            let seg = &self.segments[id as usize];
            if let Some((owner, cutoff)) = exclude {
                if seg.owner_tip == owner && seg.t1 > cutoff {
                    continue;
                }
            }
            let w = k2.eval(&geom::sub(x, &seg.midpoint()));
            if w > 0.0 {
                acc += w * seg.speed_weight * seg.duration();
            }
        }
        acc / n_scale as f64
    }

    /// A point on `tip`'s vessel, uniform with respect to the speed-weighted
    /// measure `|V| ds`. Returns `None` for tips without vessel mass.
    pub fn sample_point_on_tip_vessel(&self, tip: u64, u: f64) -> Option<Vect> {
        let vessel = self.per_tip.get(&tip)?;
        if vessel.arc_total <= 0.0 {
            return None;
        }
        let target = u.clamp(0.0, 1.0) * vessel.arc_total;
        let mut cum = 0.0;
        for &id in &vessel.segments {
            let seg = &self.segments[id as usize];
            let w = seg.arc_weight();
            if cum + w >= target || id == *vessel.segments.last().unwrap() {
                if w <= 0.0 {
                    continue;
                }
                let frac = ((target - cum) / w).clamp(0.0, 1.0);
                return Some(geom::lerp(&seg.start, &seg.end, frac));
            }
            cum += w;
        }
        None
    }
}
