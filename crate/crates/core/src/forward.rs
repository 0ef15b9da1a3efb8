use crate::error::{Error, Result};
use crate::mesh::{edge_of, Domain, Edge, Mesh, ObservationPlan};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const DEFAULT_MODES: usize = 60;
/// Guard against absurd truncation requests (memory is modes^2).
pub const MAX_MODES: usize = 4096;

/// Point sources as (location, intensity) pairs; locations strictly interior.
pub type Sources = [([f64; 2], f64)];

fn validate_modes(modes: usize) -> Result<()> {
    if modes == 0 || modes > MAX_MODES {
        return Err(Error::Config(format!(
            "mode truncation must be in 1..={MAX_MODES}, got {modes}"
        )));
    }
    Ok(())
}

/// Maps source coordinates into a frame where the sensor lies on the east
/// edge; the square and the Laplacian are invariant under these symmetries,
/// so the flux value is unchanged.
fn rotate_to_east(
    domain: &Domain,
    points: &[[f64; 2]],
    sensor: [f64; 2],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let edge = edge_of(domain, sensor)?;
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let sensor_tangent = match edge {
        Edge::East => {
            for p in points {
                xs.push(p[0]);
                ys.push(p[1]);
            }
            sensor[1]
        }
        Edge::West => {
            for p in points {
                xs.push(-p[0]);
                ys.push(p[1]);
            }
            sensor[1]
        }
        Edge::North => {
            for p in points {
                xs.push(p[1]);
                ys.push(p[0]);
            }
            sensor[0]
        }
        Edge::South => {
            for p in points {
                xs.push(-p[1]);
                ys.push(p[0]);
            }
            sensor[0]
        }
    };
    Ok((xs, ys, sensor_tangent))
}

/// Outward normal flux at one (sensor, time) for unit sources at each of
/// `points`.
///
/// The solution splits into a steady part and a decaying part:
///   u = v - sum_{m,n} exp(-lam t)/lam * phi_mn(src) phi_mn(x),
/// where the steady normal derivative v is summed in closed form over the
/// normal-direction index via
///   sum_m m (-1)^m sin(m theta) / (m^2 + n^2) = -(pi/2) sinh(n theta)/sinh(n pi),
/// evaluated in overflow-free ratio form. Only the decaying double series is
/// truncated at `modes`, so accuracy improves as t grows instead of degrading.
pub fn unit_flux_row(
    domain: &Domain,
    points: &[[f64; 2]],
    sensor: [f64; 2],
    t: f64,
    modes: usize,
) -> Result<Vec<f64>> {
    validate_modes(modes)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!(
            "observation time must be positive, got {t}"
        )));
    }
    let a = domain.half_width;
    let len = domain.side_length();
    let alpha = PI / len;
    let mut min_clear = f64::INFINITY;
    for p in points {
        if !domain.contains_interior(*p) {
            return Err(Error::Config(format!(
                "source ({}, {}) is not strictly interior",
                p[0], p[1]
            )));
        }
        min_clear = min_clear.min(domain.boundary_clearance(*p));
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }

    let (xs, ys, sy) = rotate_to_east(domain, points, sensor)?;
    let npts = points.len();
    let norm = (2.0 / len).sqrt();

    // Steady part, tangential series; terms decay like exp(n (theta - pi)).
    let theta: Vec<f64> = xs.iter().map(|x| alpha * (x + a)).collect();
    // Cap chosen so the slowest-decaying point still reaches tail < 1e-16.
    let n_cap = ((40.0 * len / (PI * min_clear)).ceil() as usize + 16).max(400);
    let mut steady = vec![0.0f64; npts];
    for n in 1..n_cap {
        let nf = n as f64;
        let mut max_tail = 0.0f64;
        let mut tails = Vec::with_capacity(npts);
        for th in &theta {
            let tail = (nf * (th - PI)).exp();
            max_tail = max_tail.max(tail);
            tails.push(tail);
        }
        if max_tail < 1e-16 && n > 8 {
            break;
        }
        let denom = 1.0 - (-2.0 * nf * PI).exp();
        let sn_sy = norm * (alpha * nf * (sy + a)).sin();
        for k in 0..npts {
            let ratio = tails[k] * (1.0 - (-2.0 * nf * theta[k]).exp()) / denom;
            let sn_y = norm * (alpha * nf * (ys[k] + a)).sin();
            steady[k] += sn_y * sn_sy * (2.0 / (len * alpha)) * (-(PI / 2.0) * ratio);
        }
    }

    // Decaying part: -Sn(Y)^T U with U = T^T Sm(X),
    // T[m][n] = exp(-lam t)/lam * s_m'(a) * s_n(sy).
    let mut t_mat = DMatrix::<f64>::zeros(modes, modes);
    for m in 1..=modes {
        let mf = m as f64;
        let dsm = norm * alpha * mf * if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in 1..=modes {
            let nf = n as f64;
            let lam = alpha * alpha * (mf * mf + nf * nf);
            let sn_sy = norm * (alpha * nf * (sy + a)).sin();
            t_mat[(m - 1, n - 1)] = (-lam * t).exp() / lam * dsm * sn_sy;
        }
    }
    let sm_x = DMatrix::<f64>::from_fn(modes, npts, |m, k| {
        norm * (alpha * (m as f64 + 1.0) * (xs[k] + a)).sin()
    });
    let sn_y = DMatrix::<f64>::from_fn(modes, npts, |n, k| {
        norm * (alpha * (n as f64 + 1.0) * (ys[k] + a)).sin()
    });
    let u = t_mat.transpose() * &sm_x;

    let mut out = steady;
    for k in 0..npts {
        let mut acc = 0.0;
        for n in 0..modes {
            acc += u[(n, k)] * sn_y[(n, k)];
        }
        out[k] -= acc;
    }
    Ok(out)
}

/// Flux response of a single unit source over a whole plan, ordered
/// sensor-major then time.
pub fn unit_source_flux(
    domain: &Domain,
    source: [f64; 2],
    plan: &ObservationPlan,
    modes: usize,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(plan.obs_count());
    let pts = [source];
    for (si, sensor) in plan.sensors.iter().enumerate() {
        for (ti, &t) in plan.times.iter().enumerate() {
            let row = unit_flux_row(domain, &pts, *sensor, t, modes)?;
            out[si * plan.times.len() + ti] = row[0];
        }
    }
    Ok(out)
}

/// obs_count x node_count matrix; column j is the unit response of node j.
pub fn observation_matrix(
    mesh: &Mesh,
    plan: &ObservationPlan,
    modes: usize,
) -> Result<DMatrix<f64>> {
    let n_nodes = mesh.node_count();
    let mut a = DMatrix::<f64>::zeros(plan.obs_count(), n_nodes);
    for (si, sensor) in plan.sensors.iter().enumerate() {
        for (ti, &t) in plan.times.iter().enumerate() {
            let row = unit_flux_row(&mesh.domain, mesh.nodes(), *sensor, t, modes)?;
            let r = si * plan.times.len() + ti;
            for (j, v) in row.iter().enumerate() {
                a[(r, j)] = *v;
            }
        }
    }
    Ok(a)
}

/// K(f) by direct series evaluation (sources need not be mesh nodes).
pub fn forward_flux(
    domain: &Domain,
    sources: &Sources,
    plan: &ObservationPlan,
    modes: usize,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(plan.obs_count());
    if sources.is_empty() {
        return Ok(out);
    }
    let pts: Vec<[f64; 2]> = sources.iter().map(|s| s.0).collect();
    for (si, sensor) in plan.sensors.iter().enumerate() {
        for (ti, &t) in plan.times.iter().enumerate() {
            let row = unit_flux_row(domain, &pts, *sensor, t, modes)?;
            let r = si * plan.times.len() + ti;
            out[r] = row
                .iter()
                .zip(sources.iter())
                .map(|(v, (_, w))| v * w)
                .sum();
        }
    }
    Ok(out)
}

const CACHE_MAGIC: &[u8; 8] = b"OBSMAT01";

fn cache_header(mesh: &Mesh, plan: &ObservationPlan, modes: usize) -> Vec<u8> {
    let mut h = Vec::new();
    h.extend_from_slice(CACHE_MAGIC);
    h.extend_from_slice(&mesh.domain.half_width.to_le_bytes());
    h.extend_from_slice(&mesh.spacing.to_le_bytes());
    h.extend_from_slice(&(modes as u64).to_le_bytes());
    h.extend_from_slice(&(plan.sensors.len() as u64).to_le_bytes());
    h.extend_from_slice(&(plan.times.len() as u64).to_le_bytes());
    for s in &plan.sensors {
        h.extend_from_slice(&s[0].to_le_bytes());
        h.extend_from_slice(&s[1].to_le_bytes());
    }
    for t in &plan.times {
        h.extend_from_slice(&t.to_le_bytes());
    }
    h
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn cache_path(dir: &Path, mesh: &Mesh, plan: &ObservationPlan, modes: usize) -> PathBuf {
    let key = fnv1a64(&cache_header(mesh, plan, modes));
    dir.join(format!("obs-{key:016x}.bin"))
}

/// Binary cache: header (magic, parameters, sensors, times), then the
/// row-major matrix entries; everything little-endian f64/u64.
pub fn observation_matrix_cached(
    dir: &Path,
    mesh: &Mesh,
    plan: &ObservationPlan,
    modes: usize,
) -> Result<DMatrix<f64>> {
    let path = cache_path(dir, mesh, plan, modes);
    let header = cache_header(mesh, plan, modes);
    let rows = plan.obs_count();
    let cols = mesh.node_count();
    if path.exists() {
        let mut file = fs::File::open(&path)?;
        let mut stored_header = vec![0u8; header.len()];
        file.read_exact(&mut stored_header)
            .map_err(|e| Error::Cache(format!("truncated cache {}: {e}", path.display())))?;
        if stored_header != header {
            return Err(Error::Cache(format!(
                "cache {} does not match the requested geometry",
                path.display()
            )));
        }
        let mut data = vec![0u8; rows * cols * 8];
        file.read_exact(&mut data)
            .map_err(|e| Error::Cache(format!("truncated cache {}: {e}", path.display())))?;
        let mut a = DMatrix::<f64>::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let off = (r * cols + c) * 8;
                a[(r, c)] = f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
            }
        }
        return Ok(a);
    }
    let a = observation_matrix(mesh, plan, modes)?;
    fs::create_dir_all(dir)?;
    let mut buf = header;
    buf.reserve(rows * cols * 8);
    for r in 0..rows {
        for c in 0..cols {
            buf.extend_from_slice(&a[(r, c)].to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(&tmp, &path)?;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{sensor_ring, DEFAULT_SPACING};
    use approx::assert_relative_eq;

    fn setup() -> (Domain, Mesh) {
        let d = Domain::default();
        let m = Mesh::build(d, DEFAULT_SPACING).unwrap();
        (d, m)
    }

    #[test]
    fn frozen_single_pair_values() {
        // Reference values computed with an independently written evaluator
        // of the same series (validated against a finite-difference solve).
        let (d, _) = setup();
        let cases: [([f64; 2], [f64; 2], f64, f64); 6] = [
            ([-0.875, 0.0], [1.0, 0.0], 1.0, -1.676610255049660e-2),
            ([-0.875, 0.0], [0.4, 1.0], 1.0, -1.743281300643298e-2),
            ([0.75, 0.625], [1.0, 0.0], 1.0, -1.297734441461273e-1),
            ([0.75, 0.625], [-1.0, 0.0], 1.0, -1.866192514701099e-2),
            ([0.25, -0.5], [-0.4, -1.0], 1.0, -1.725712952146287e-1),
            ([0.5, 0.25], [1.0, -0.8], 1.0, -4.338614284248957e-2),
        ];
        for (src, sensor, t, want) in cases {
            let got = unit_flux_row(&d, &[src], sensor, t, DEFAULT_MODES).unwrap()[0];
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn early_time_flux_is_numerically_zero_far_from_source() {
        // Heat from (-0.375, 0.25) cannot reach (1, 0) by t = 0.01; the
        // steady and decaying parts must cancel to rounding.
        let (d, _) = setup();
        let v = unit_flux_row(&d, &[[-0.375, 0.25]], [1.0, 0.0], 0.01, DEFAULT_MODES).unwrap()[0];
        assert!(v.abs() < 1e-12, "got {v}");
    }

    #[test]
    fn four_fold_symmetry_at_the_center() {
        let (d, _) = setup();
        let vals: Vec<f64> = sensor_ring(&d, 4)
            .unwrap()
            .into_iter()
            .map(|s| unit_flux_row(&d, &[[0.0, 0.0]], s, 1.0, DEFAULT_MODES).unwrap()[0])
            .collect();
        for v in &vals[1..] {
            assert_relative_eq!(*v, vals[0], max_relative = 1e-12);
        }
        assert!(
            vals[0] < 0.0,
            "outward flux of a positive source is negative"
        );
    }

    #[test]
    fn mirror_symmetry_across_the_sensor_axis() {
        let (d, _) = setup();
        let up = unit_flux_row(&d, &[[-0.5, 0.375]], [1.0, 0.0], 1.0, DEFAULT_MODES).unwrap()[0];
        let dn = unit_flux_row(&d, &[[-0.5, -0.375]], [1.0, 0.0], 1.0, DEFAULT_MODES).unwrap()[0];
        assert_relative_eq!(up, dn, max_relative = 1e-12);
    }

    #[test]
    fn closer_sensor_sees_stronger_flux() {
        let (d, _) = setup();
        let near = unit_flux_row(&d, &[[0.5, 0.0]], [1.0, 0.0], 1.0, DEFAULT_MODES).unwrap()[0];
        let far = unit_flux_row(&d, &[[0.5, 0.0]], [-1.0, 0.0], 1.0, DEFAULT_MODES).unwrap()[0];
        assert!(near.abs() > far.abs());
    }

    #[test]
    fn flux_magnitude_grows_toward_steady_state() {
        let (d, _) = setup();
        let mut prev = 0.0;
        for t in [0.1, 0.25, 0.5, 1.0, 2.0] {
            let v = unit_flux_row(&d, &[[0.25, -0.25]], [1.0, 0.0], t, DEFAULT_MODES).unwrap()[0];
            assert!(v.abs() >= prev, "flux magnitude decreased at t={t}");
            prev = v.abs();
        }
    }

    #[test]
    fn observation_matrix_shape_order_and_frozen_entries() {
        let (d, m) = setup();
        let plan = ObservationPlan::ring(&d, 2, vec![0.5, 1.0]).unwrap();
        let a = observation_matrix(&m, &plan, DEFAULT_MODES).unwrap();
        assert_eq!(a.nrows(), 4);
        assert_eq!(a.ncols(), 225);
        // Rows are sensor-major then time: row 0 = (sensor (1,0), t=0.5),
        // row 3 = (sensor (-1,0), t=1).
        assert_relative_eq!(a[(0, 105)], -1.214954561006224e-2, max_relative = 1e-10);
        assert_relative_eq!(a[(3, 105)], -2.529003435156536e0, max_relative = 1e-10);
        let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_relative_eq!(frob, 9.333686346791975e0, max_relative = 1e-10);
    }

    #[test]
    fn matrix_times_unit_vector_equals_direct_flux() {
        let (d, m) = setup();
        let plan = ObservationPlan::ring(&d, 3, vec![1.0]).unwrap();
        let a = observation_matrix(&m, &plan, DEFAULT_MODES).unwrap();
        let j = m.index_of(0.375, -0.125).unwrap();
        let direct = unit_source_flux(&d, m.node(j), &plan, DEFAULT_MODES).unwrap();
        for r in 0..plan.obs_count() {
            assert_relative_eq!(a[(r, j)], direct[r], max_relative = 1e-12);
        }
    }

    #[test]
    fn forward_flux_is_linear() {
        let (d, _) = setup();
        let plan = ObservationPlan::ring(&d, 4, vec![1.0]).unwrap();
        let f1 = forward_flux(&d, &[([-0.25, 0.5], 0.7)], &plan, DEFAULT_MODES).unwrap();
        let f2 = forward_flux(&d, &[([0.5, -0.125], 0.4)], &plan, DEFAULT_MODES).unwrap();
        let both = forward_flux(
            &d,
            &[([-0.25, 0.5], 0.7), ([0.5, -0.125], 0.4)],
            &plan,
            DEFAULT_MODES,
        )
        .unwrap();
        for r in 0..plan.obs_count() {
            assert_relative_eq!(both[r], f1[r] + f2[r], epsilon = 1e-14);
        }
        let doubled = forward_flux(&d, &[([-0.25, 0.5], 1.4)], &plan, DEFAULT_MODES).unwrap();
        for r in 0..plan.obs_count() {
            assert_relative_eq!(doubled[r], 2.0 * f1[r], epsilon = 1e-15);
        }
        let empty = forward_flux(&d, &[], &plan, DEFAULT_MODES).unwrap();
        assert!(empty.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn boundary_source_and_bad_modes_are_rejected() {
        let (d, _) = setup();
        assert!(unit_flux_row(&d, &[[1.0, 0.0]], [1.0, 0.0], 1.0, 60).is_err());
        assert!(unit_flux_row(&d, &[[0.0, 0.0]], [1.0, 0.0], 1.0, 0).is_err());
        assert!(unit_flux_row(&d, &[[0.0, 0.0]], [1.0, 0.0], 1.0, MAX_MODES + 1).is_err());
        assert!(unit_flux_row(&d, &[[0.0, 0.0]], [1.0, 0.0], -1.0, 60).is_err());
    }

    #[test]
    fn truncation_is_already_converged_at_the_default() {
        let (d, _) = setup();
        for (src, sensor) in [
            ([-0.875, 0.0], [1.0, 0.0]),
            ([0.75, 0.625], [0.4, 1.0]),
            ([0.125, -0.625], [-1.0, 0.0]),
        ] {
            let v60 = unit_flux_row(&d, &[src], sensor, 1.0, 60).unwrap()[0];
            let v120 = unit_flux_row(&d, &[src], sensor, 1.0, 120).unwrap()[0];
            assert_relative_eq!(v60, v120, max_relative = 1e-12);
        }
    }

    #[test]
    fn cache_roundtrip_is_bit_exact_and_validates_geometry() {
        let (d, m) = setup();
        let plan = ObservationPlan::ring(&d, 2, vec![1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let fresh = observation_matrix_cached(dir.path(), &m, &plan, DEFAULT_MODES).unwrap();
        let path = cache_path(dir.path(), &m, &plan, DEFAULT_MODES);
        assert!(path.exists());
        let reloaded = observation_matrix_cached(dir.path(), &m, &plan, DEFAULT_MODES).unwrap();
        assert_eq!(fresh, reloaded);
        // A different plan must map to a different cache file.
        let other = ObservationPlan::ring(&d, 2, vec![0.5]).unwrap();
        assert_ne!(path, cache_path(dir.path(), &m, &other, DEFAULT_MODES));
    }
}
