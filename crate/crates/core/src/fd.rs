use crate::error::{Error, Result};
use crate::forward::Sources;
use crate::mesh::{edge_of, Domain, Edge, ObservationPlan};
use nalgebra::DVector;

/// Constant-coefficient tridiagonal solver for (I - r*D2), D2 = [1, -2, 1];
/// forward-elimination factors are precomputed once per grid.
struct Tridiag {
    r: f64,
    cp: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiag {
    fn new(n: usize, r: f64) -> Self {
        let b = 1.0 + 2.0 * r;
        let mut cp = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = b;
        cp[0] = -r / b;
        for i in 1..n {
            denom[i] = b + r * cp[i - 1];
            cp[i] = -r / denom[i];
        }
        Self { r, cp, denom }
    }

    fn solve(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] /= self.denom[0];
        for i in 1..n {
            d[i] = (d[i] + self.r * d[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }
}

/// Independent finite-difference oracle: Peaceman-Rachford ADI
/// (Crank-Nicolson in time, second order in space), delta sources deposited
/// on the nearest grid node scaled by 1/h^2, boundary flux by a one-sided
/// second-order difference. Sensors and requested times must align with the
/// grid and the step size.
pub fn fd_oracle_flux(
    domain: &Domain,
    sources: &Sources,
    plan: &ObservationPlan,
    grid_n: usize,
    dt: f64,
) -> Result<DVector<f64>> {
    if grid_n < 64 {
        return Err(Error::Config(format!(
            "oracle grid must be at least 64, got {grid_n}"
        )));
    }
    if !(dt > 0.0) || dt > 1e-3 + 1e-15 {
        return Err(Error::Config(format!(
            "oracle step must be in (0, 1e-3], got {dt}"
        )));
    }
    let a = domain.half_width;
    let h = domain.side_length() / grid_n as f64;
    let ni = grid_n - 1;

    let mut sensor_idx = Vec::with_capacity(plan.sensors.len());
    for s in &plan.sensors {
        let edge = edge_of(domain, *s)?;
        let tangent = match edge {
            Edge::East | Edge::West => s[1],
            Edge::North | Edge::South => s[0],
        };
        let f = (tangent + a) / h;
        if (f - f.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "sensor ({}, {}) does not lie on the {grid_n}-point oracle grid",
                s[0], s[1]
            )));
        }
        let k = f.round() as usize;
        if k == 0 || k >= grid_n {
            return Err(Error::Config("sensor at a domain corner".into()));
        }
        sensor_idx.push((edge, k - 1));
    }

    let step_of = |t: f64| -> Result<usize> {
        let f = t / dt;
        if (f - f.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "observation time {t} is not a multiple of the oracle step {dt}"
            )));
        }
        Ok(f.round() as usize)
    };
    let snapshot_steps: Vec<usize> = plan
        .times
        .iter()
        .map(|t| step_of(*t))
        .collect::<Result<_>>()?;
    let last_step = *snapshot_steps.iter().max().unwrap();

    // Source term; u[i*ni + j] approximates u(x_i, y_j).
    let mut f_grid = vec![0.0f64; ni * ni];
    for (p, w) in sources {
        if !domain.contains_interior(*p) {
            return Err(Error::Config(format!(
                "source ({}, {}) is not strictly interior",
                p[0], p[1]
            )));
        }
        let i0 = ((p[0] + a) / h).round() as usize;
        let j0 = ((p[1] + a) / h).round() as usize;
        if i0 == 0 || i0 >= grid_n || j0 == 0 || j0 >= grid_n {
            return Err(Error::Config(
                "source deposits outside the interior grid".into(),
            ));
        }
        f_grid[(i0 - 1) * ni + (j0 - 1)] += w / (h * h);
    }

    let r = dt / (2.0 * h * h);
    let solver = Tridiag::new(ni, r);
    let mut u = vec![0.0f64; ni * ni];
    let mut rhs = vec![0.0f64; ni * ni];
    let mut col = vec![0.0f64; ni];

    let mut out = DVector::zeros(plan.obs_count());
    let record = |u: &[f64], step: usize, out: &mut DVector<f64>| {
        for (ti, snap) in snapshot_steps.iter().enumerate() {
            if *snap != step {
                continue;
            }
            for (si, &(edge, k)) in sensor_idx.iter().enumerate() {
                let (u1, u2) = match edge {
                    Edge::East => (u[(ni - 1) * ni + k], u[(ni - 2) * ni + k]),
                    Edge::West => (u[k], u[ni + k]),
                    Edge::North => (u[k * ni + (ni - 1)], u[k * ni + (ni - 2)]),
                    Edge::South => (u[k * ni], u[k * ni + 1]),
                };
                out[si * plan.times.len() + ti] = (-4.0 * u1 + u2) / (2.0 * h);
            }
        }
    };
    record(&u, 0, &mut out);

    for step in 1..=last_step {
        // Half step 1: explicit in y, implicit in x.
        for i in 0..ni {
            for j in 0..ni {
                let c = u[i * ni + j];
                let mut v = (1.0 - 2.0 * r) * c + (dt / 2.0) * f_grid[i * ni + j];
                if j > 0 {
                    v += r * u[i * ni + j - 1];
                }
                if j + 1 < ni {
                    v += r * u[i * ni + j + 1];
                }
                rhs[i * ni + j] = v;
            }
        }
        for j in 0..ni {
            for i in 0..ni {
                col[i] = rhs[i * ni + j];
            }
            solver.solve(&mut col);
            for i in 0..ni {
                u[i * ni + j] = col[i];
            }
        }
        // Half step 2: explicit in x, implicit in y.
        for i in 0..ni {
            for j in 0..ni {
                let c = u[i * ni + j];
                let mut v = (1.0 - 2.0 * r) * c + (dt / 2.0) * f_grid[i * ni + j];
                if i > 0 {
                    v += r * u[(i - 1) * ni + j];
                }
                if i + 1 < ni {
                    v += r * u[(i + 1) * ni + j];
                }
                rhs[i * ni + j] = v;
            }
        }
        for i in 0..ni {
            let row = &mut rhs[i * ni..(i + 1) * ni];
            solver.solve(row);
            u[i * ni..(i + 1) * ni].copy_from_slice(row);
        }
        record(&u, step, &mut out);
    }

    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerics(
            "oracle produced non-finite flux values".into(),
        ));
    }
    Ok(out)
}
