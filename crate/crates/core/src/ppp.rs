use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Axis-aligned sampling window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::Config(format!(
                "degenerate window [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn square(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] < self.x1 && p[1] >= self.y0 && p[1] < self.y1
    }
}

/// Poisson point process by the rejection construction: Poisson(lambda_max
/// * area) uniform candidates, each kept with probability lambda(x) /
/// lambda_max. For homogeneous lambda the count over any region A is
/// Poisson(lambda * |A|).
pub fn sample_ppp<R, F>(
    rng: &mut R,
    window: &Window,
    lambda_max: f64,
    lambda: F,
) -> Result<Vec<[f64; 2]>>
where
    R: Rng,
    F: Fn([f64; 2]) -> f64,
{
    if lambda_max < 0.0 || !lambda_max.is_finite() {
        return Err(Error::Config(format!(
            "intensity bound must be finite and nonnegative, got {lambda_max}"
        )));
    }
    if lambda_max == 0.0 {
        return Ok(Vec::new());
    }
    let mean = lambda_max * window.area();
    let count = Poisson::new(mean)
        .map_err(|e| Error::Config(format!("invalid Poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let p = [
            rng.gen_range(window.x0..window.x1),
            rng.gen_range(window.y0..window.y1),
        ];
        let lam = lambda(p);
        if !(0.0..=lambda_max * (1.0 + 1e-12)).contains(&lam) {
            return Err(Error::Config(format!(
                "intensity {lam} at ({}, {}) violates 0 <= lambda <= lambda_max = {lambda_max}",
                p[0], p[1]
            )));
        }
        let u: f64 = rng.gen();
        if u < lam / lambda_max {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn sample_homogeneous_ppp<R: Rng>(
    rng: &mut R,
    window: &Window,
    lambda: f64,
) -> Result<Vec<[f64; 2]>> {
    sample_ppp(rng, window, lambda, |_| lambda)
}

/// Independent thinning: each point kept with probability t(x).
pub fn thin_ppp<R, T>(rng: &mut R, points: &[[f64; 2]], retain: T) -> Result<Vec<[f64; 2]>>
where
    R: Rng,
    T: Fn([f64; 2]) -> f64,
{
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let t = retain(*p);
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Config(format!(
                "retention probability {t} at ({}, {}) is outside [0, 1]",
                p[0], p[1]
            )));
        }
        let u: f64 = rng.gen();
        if u < t {
            out.push(*p);
        }
    }
    Ok(out)
}

/// Independent marks drawn conditionally on each location.
pub fn mark_ppp<R, K>(rng: &mut R, points: &[[f64; 2]], mut kernel: K) -> Vec<([f64; 2], f64)>
where
    R: Rng,
    K: FnMut(&mut R, [f64; 2]) -> f64,
{
    points.iter().map(|p| (*p, kernel(rng, *p))).collect()
}

/// Superposition of two realizations (concatenation; independence is the
/// caller's contract).
pub fn superpose(mut a: Vec<[f64; 2]>, mut b: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    a.append(&mut b);
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, STREAM_PPP};
    use rand_distr::Normal;

    #[test]
    fn zero_intensity_gives_empty_set() {
        let w = Window::square(1.0).unwrap();
        let mut rng = stream_rng(1, STREAM_PPP);
        assert!(sample_ppp(&mut rng, &w, 0.0, |_| 0.0).unwrap().is_empty());
        let kept = sample_ppp(&mut rng, &w, 5.0, |_| 0.0).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn homogeneous_mean_count_matches_lambda_area() {
        let w = Window::square(1.0).unwrap();
        let mut rng = stream_rng(2, STREAM_PPP);
        let reps = 10_000;
        let mut total = 0usize;
        for _ in 0..reps {
            total += sample_homogeneous_ppp(&mut rng, &w, 5.0).unwrap().len();
        }
        let mean = total as f64 / reps as f64;
        // Poisson(20): the mean over 1e4 draws is within 3*sqrt(20/1e4).
        assert!((mean - 20.0).abs() < 0.14, "mean {mean}");
    }

    #[test]
    fn all_samples_fall_inside_the_window() {
        let w = Window::new(-1.0, 0.5, 0.25, 1.0).unwrap();
        let mut rng = stream_rng(3, STREAM_PPP);
        for _ in 0..200 {
            for p in sample_homogeneous_ppp(&mut rng, &w, 8.0).unwrap() {
                assert!(w.contains(p));
            }
        }
    }

    #[test]
    fn disjoint_halves_have_independent_counts() {
        let w = Window::square(1.0).unwrap();
        let left = Window::new(-1.0, 0.0, -1.0, 1.0).unwrap();
        let mut rng = stream_rng(4, STREAM_PPP);
        let reps = 10_000;
        let (mut sl, mut sr, mut sll, mut srr, mut slr) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let pts = sample_homogeneous_ppp(&mut rng, &w, 5.0).unwrap();
            let nl = pts.iter().filter(|p| left.contains(**p)).count() as f64;
            let nr = pts.len() as f64 - nl;
            sl += nl;
            sr += nr;
            sll += nl * nl;
            srr += nr * nr;
            slr += nl * nr;
        }
        let n = reps as f64;
        let cov = slr / n - (sl / n) * (sr / n);
        let vl = sll / n - (sl / n) * (sl / n);
        let vr = srr / n - (sr / n) * (sr / n);
        let rho = cov / (vl * vr).sqrt();
        assert!(rho.abs() < 0.03, "count correlation {rho}");
    }

    #[test]
    fn inhomogeneous_rejection_matches_the_target_mass() {
        // lambda(x, y) = 1.5 + 0.5 x on (-1,1)^2 has total mass 6.
        let w = Window::square(1.0).unwrap();
        let mut rng = stream_rng(5, STREAM_PPP);
        let reps = 10_000;
        let mut total = 0usize;
        for _ in 0..reps {
            total += sample_ppp(&mut rng, &w, 2.0, |p| 1.5 + 0.5 * p[0])
                .unwrap()
                .len();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 6.0).abs() < 0.08, "mean {mean}");
    }

    #[test]
    fn thinning_identity_empty_and_rate() {
        let w = Window::square(1.0).unwrap();
        let mut rng = stream_rng(6, STREAM_PPP);
        let pts = sample_homogeneous_ppp(&mut rng, &w, 10.0).unwrap();
        assert_eq!(thin_ppp(&mut rng, &pts, |_| 1.0).unwrap(), pts);
        assert!(thin_ppp(&mut rng, &pts, |_| 0.0).unwrap().is_empty());
        assert!(thin_ppp(&mut rng, &pts, |_| 1.2).is_err());

        let reps = 10_000;
        let mut kept = 0usize;
        for _ in 0..reps {
            let pts = sample_homogeneous_ppp(&mut rng, &w, 10.0).unwrap();
            kept += thin_ppp(&mut rng, &pts, |_| 0.3).unwrap().len();
        }
        let mean = kept as f64 / reps as f64;
        // Thinned intensity 0.3 * 10 over area 4: Poisson mean 12.
        assert!((mean / 12.0 - 1.0).abs() < 0.02, "thinned mean {mean}");
    }

    #[test]
    fn marks_are_conditionally_independent_draws() {
        let w = Window::square(1.0).unwrap();
        let mut rng = stream_rng(7, STREAM_PPP);
        assert!(mark_ppp(&mut rng, &[], |_, _| 1.0).is_empty());

        let pts = sample_homogeneous_ppp(&mut rng, &w, 10.0).unwrap();
        let marked = mark_ppp(&mut rng, &pts, |_, _| 1.0);
        assert!(marked.iter().all(|(_, m)| *m == 1.0));

        let normal = Normal::new(0.5, 0.1).unwrap();
        let (mut total, mut count) = (0.0, 0usize);
        for _ in 0..1000 {
            let pts = sample_homogeneous_ppp(&mut rng, &w, 5.0).unwrap();
            for (_, m) in mark_ppp(&mut rng, &pts, |r, _| normal.sample(r)) {
                total += m;
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!((mean - 0.5).abs() < 0.005, "mark mean {mean}");
    }

    #[test]
    fn superposition_adds_intensities() {
        let w = Window::square(1.0).unwrap();
        let mut rng = stream_rng(8, STREAM_PPP);
        assert_eq!(superpose(vec![], vec![[0.5, 0.5]]), vec![[0.5, 0.5]]);

        let reps = 10_000;
        let mut total = 0usize;
        for _ in 0..reps {
            let a = sample_homogeneous_ppp(&mut rng, &w, 2.0).unwrap();
            let b = sample_homogeneous_ppp(&mut rng, &w, 3.0).unwrap();
            total += superpose(a, b).len();
        }
        let mean = total as f64 / reps as f64;
        // Summed intensity 5 over area 4: mean count 20, tolerance 2%.
        assert!((mean / 20.0 - 1.0).abs() < 0.02, "superposed mean {mean}");
    }

    #[test]
    fn fixed_seed_replays_exactly() {
        let w = Window::square(1.0).unwrap();
        let mut a = stream_rng(9, STREAM_PPP);
        let mut b = stream_rng(9, STREAM_PPP);
        let pa = sample_ppp(&mut a, &w, 4.0, |p| 2.0 + p[1]).unwrap();
        let pb = sample_ppp(&mut b, &w, 4.0, |p| 2.0 + p[1]).unwrap();
        assert_eq!(pa, pb);
    }
}
