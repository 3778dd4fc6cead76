//! Polyhedral selection events `{y : Ay <= b}` and their reduction to
//! truncation intervals along a contrast direction.
//!
//! Writing `c = eta / ||eta||^2` and `z = (I - c eta')y`, the statistic
//! `eta'y` and `z` are independent, and each polyhedron row constrains
//! `eta'y` from above (`(Ac)_j > 0`), from below (`(Ac)_j < 0`), or not at
//! all (`(Ac)_j = 0`, a feasibility condition on `z` alone). Intersecting the
//! row bounds gives one interval per polyhedron; unions over sign patterns
//! give a union of intervals. A grid-plus-bisection line search over
//! `y = z + c u` covers selectors with no tractable polyhedron.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::truncnorm::{merge_intervals, Interval};

/// Provenance of a polyhedron row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowTag {
    /// Lasso active-coordinate sign constraint.
    LassoSign,
    /// Lasso inactive-coordinate subgradient bound.
    LassoInactive,
    /// Forward-stepwise competition row at the given step.
    FsStep(usize),
    /// LARS knot-ordering row.
    LarsOrder,
    /// LARS competitor row.
    LarsCompete,
}

/// The selection event `{y : Ay <= b}`.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    a: Array2<f64>,
    b: Array1<f64>,
    tags: Vec<RowTag>,
}

impl Polyhedron {
    pub fn new(a: Array2<f64>, b: Array1<f64>, tags: Vec<RowTag>) -> Result<Self> {
        let (m, _n) = a.dim();
        if m < 1 {
            return Err(Error::InvalidConfig(
                "polyhedron needs at least one row".into(),
            ));
        }
        if b.len() != m || tags.len() != m {
            return Err(Error::InvalidConfig(format!(
                "row count mismatch: A has {m} rows, b has {}, tags has {}",
                b.len(),
                tags.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite polyhedron entries".into()));
        }
        Ok(Self { a, b, tags })
    }

    /// Incremental construction; rows are pushed as `(row, offset, tag)`.
    pub fn from_rows(n: usize, rows: Vec<(Array1<f64>, f64, RowTag)>) -> Result<Self> {
        let m = rows.len();
        let mut a = Array2::zeros((m, n));
        let mut b = Array1::zeros(m);
        let mut tags = Vec::with_capacity(m);
        for (i, (row, off, tag)) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            a.row_mut(i).assign(&row);
            b[i] = off;
            tags.push(tag);
        }
        Self::new(a, b, tags)
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn tags(&self) -> &[RowTag] {
        &self.tags
    }

    /// Largest violation `A_j y - b_j` and the row attaining it.
    pub fn max_violation(&self, y: ArrayView1<'_, f64>) -> (usize, f64) {
        let v = self.a.dot(&y) - &self.b;
        let mut row = 0;
        let mut worst = f64::NEG_INFINITY;
        for (j, &val) in v.iter().enumerate() {
            if val > worst {
                worst = val;
                row = j;
            }
        }
        (row, worst)
    }

    pub fn contains(&self, y: ArrayView1<'_, f64>, slack: f64) -> bool {
        self.max_violation(y).1 <= slack
    }
}

/// Truncation of the line `{z0 + c u}` induced by a selection event: a union
/// of intervals for `eta'y` plus the feasibility slack of the untouched rows.
#[derive(Debug, Clone)]
pub struct TruncationRegion {
    intervals: Vec<Interval>,
    /// Smallest `b_j - (Az)_j` over rows with `(Ac)_j = 0`; +inf when none.
    pub nu0: f64,
    pub eta: Array1<f64>,
    /// Component of the observation orthogonal to `eta` (that is, `z0`).
    pub z0: Array1<f64>,
}

impl TruncationRegion {
    /// Builds a region directly from intervals (merged and sorted), for
    /// callers that already know the truncation set — e.g. an untruncated
    /// sanity check or an externally computed event.
    pub fn from_intervals(intervals: Vec<Interval>, eta: Array1<f64>, z0: Array1<f64>) -> Self {
        Self {
            intervals: merge_intervals(intervals),
            nu0: f64::INFINITY,
            eta,
            z0,
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Feasibility of the direction-free rows.
    pub fn nu0_ok(&self) -> bool {
        self.nu0 >= -1e-9
    }

    pub fn contains(&self, v: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(v))
    }

    /// Lower endpoint of the leftmost interval.
    pub fn inf(&self) -> f64 {
        self.intervals[0].lo
    }

    /// Upper endpoint of the rightmost interval.
    pub fn sup(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].hi
    }
}

/// Relative threshold below which a row is treated as orthogonal to `c`.
const AC_ZERO_TOL: f64 = 1e-10;

struct SlicedRows {
    nu_minus: f64,
    nu_plus: f64,
    nu0: f64,
}

fn slice_rows(poly: &Polyhedron, c: &Array1<f64>, z: &Array1<f64>) -> SlicedRows {
    let ac = poly.a.dot(c);
    let az = poly.a.dot(z);
    let c_norm = c.dot(c).sqrt();

    let mut nu_minus = f64::NEG_INFINITY;
    let mut nu_plus = f64::INFINITY;
    let mut nu0 = f64::INFINITY;
    for j in 0..poly.nrows() {
        let row = poly.a.row(j);
        let row_norm = row.dot(&row).sqrt();
        let gap = poly.b[j] - az[j];
        if ac[j].abs() <= AC_ZERO_TOL * row_norm * c_norm {
            nu0 = nu0.min(gap);
        } else if ac[j] > 0.0 {
            nu_plus = nu_plus.min(gap / ac[j]);
        } else {
            nu_minus = nu_minus.max(gap / ac[j]);
        }
    }
    SlicedRows {
        nu_minus,
        nu_plus,
        nu0,
    }
}

fn direction_and_shift(
    eta: ArrayView1<'_, f64>,
    y_obs: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>, f64)> {
    let eta_norm2 = eta.dot(&eta);
    if !(eta_norm2 > 0.0) {
        return Err(Error::InvalidConfig("eta must be nonzero".into()));
    }
    // With covariance sigma^2 I the sigma^2 factors cancel in c.
    let c = eta.mapv(|v| v / eta_norm2);
    let stat = eta.dot(&y_obs);
    let mut z = y_obs.to_owned();
    z.scaled_add(-stat, &c);
    Ok((c, z, stat))
}

/// Slices a single polyhedron along `eta`, yielding one interval
/// `[nu_minus, nu_plus]` for `eta'y` and the feasibility value `nu0`.
///
/// Errors with `InfeasibleAtObservation` when `y_obs` itself violates the
/// polyhedron: the region is then not this observation's selection event.
pub fn slice(
    poly: &Polyhedron,
    eta: ArrayView1<'_, f64>,
    sigma2: f64,
    y_obs: ArrayView1<'_, f64>,
) -> Result<TruncationRegion> {
    check_sigma2(sigma2)?;
    let (row, violation) = poly.max_violation(y_obs);
    if violation > 1e-7 {
        return Err(Error::InfeasibleAtObservation { row, violation });
    }
    let (c, z, _) = direction_and_shift(eta, y_obs)?;
    let rows = slice_rows(poly, &c, &z);
    Ok(TruncationRegion {
        intervals: vec![Interval::new(rows.nu_minus, rows.nu_plus)],
        nu0: rows.nu0,
        eta: eta.to_owned(),
        z0: z,
    })
}

/// Slices every polyhedron of a union (for instance one per sign pattern) and
/// merges the feasible intervals. Components whose direction-free rows fail
/// (`nu0 < 0`) or whose interval is empty are dropped.
pub fn slice_union(
    polys: &[Polyhedron],
    eta: ArrayView1<'_, f64>,
    sigma2: f64,
    y_obs: ArrayView1<'_, f64>,
) -> Result<TruncationRegion> {
    check_sigma2(sigma2)?;
    let (c, z, _) = direction_and_shift(eta, y_obs)?;
    let scale = sigma2.sqrt() * eta.dot(&eta).sqrt();

    let mut intervals = Vec::new();
    for poly in polys {
        let rows = slice_rows(poly, &c, &z);
        if rows.nu0 < -1e-9 * (1.0 + scale) {
            continue;
        }
        if rows.nu_minus > rows.nu_plus + 1e-12 * scale {
            continue;
        }
        intervals.push(Interval::new(
            rows.nu_minus.min(rows.nu_plus),
            rows.nu_plus,
        ));
    }
    if intervals.is_empty() {
        return Err(Error::NoFeasibleComponent);
    }
    // Merge abutting components: gaps below the merge width are artifacts of
    // adjacent sign polyhedra sharing a face.
    let eps = 1e-9 * (1.0 + scale);
    let mut widened: Vec<Interval> = intervals
        .iter()
        .map(|iv| Interval::new(iv.lo, iv.hi + eps))
        .collect();
    widened = merge_intervals(widened);
    let merged = widened
        .into_iter()
        .map(|iv| Interval::new(iv.lo, iv.hi - eps))
        .collect();

    Ok(TruncationRegion {
        intervals: merged,
        nu0: f64::INFINITY,
        eta: eta.to_owned(),
        z0: z,
    })
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sigma2 must be positive and finite, got {sigma2}"
        )));
    }
    Ok(())
}

/// Number of bisection steps used to refine each run boundary.
const LINE_SEARCH_BISECTIONS: usize = 40;

/// Scans the line `y(u) = z0 + c u` for the set of `u` where `selector`
/// reproduces the observed selection, returning the maximal matching runs as
/// intervals. The grid has `grid_points` nodes spanning
/// `eta'y_obs +- span * sigma * ||eta||`; run boundaries are sharpened by 40
/// bisection steps. Components narrower than the grid pitch can be missed;
/// this is the documented approximation of the method.
pub fn line_search_region<K, F>(
    selector: F,
    y_obs: ArrayView1<'_, f64>,
    eta: ArrayView1<'_, f64>,
    sigma2: f64,
    span: f64,
    grid_points: usize,
) -> Result<TruncationRegion>
where
    K: PartialEq,
    F: Fn(ArrayView1<'_, f64>) -> Result<K>,
{
    check_sigma2(sigma2)?;
    if grid_points < 100 {
        return Err(Error::InvalidConfig(format!(
            "line search needs at least 100 grid points, got {grid_points}"
        )));
    }
    if !(span > 0.0) {
        return Err(Error::InvalidConfig("span must be positive".into()));
    }
    let (c, z, stat) = direction_and_shift(eta, y_obs)?;
    let scale = sigma2.sqrt() * eta.dot(&eta).sqrt();
    let half = span * scale;
    let lo = stat - half;
    let hi = stat + half;

    let key_obs = selector(y_obs)?;
    let at = |u: f64| -> Array1<f64> {
        let mut y = z.clone();
        y.scaled_add(u, &c);
        y
    };
    let matches = |u: f64| -> Result<bool> { Ok(selector(at(u).view())? == key_obs) };

    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut hits = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        hits.push(matches(lo + step * i as f64)?);
    }

    // Bisect between a matching and a non-matching point, returning the
    // boundary estimate from the matching side.
    let refine = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..LINE_SEARCH_BISECTIONS {
            let mid = 0.5 * (inside + outside);
            if matches(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };

    let mut intervals = Vec::new();
    let mut i = 0;
    while i < grid_points {
        if !hits[i] {
            i += 1;
            continue;
        }
        let run_start = i;
        while i + 1 < grid_points && hits[i + 1] {
            i += 1;
        }
        let run_end = i;
        let u_start = lo + step * run_start as f64;
        let u_end = lo + step * run_end as f64;
        let left = if run_start == 0 {
            u_start
        } else {
            refine(u_start, u_start - step)?
        };
        let right = if run_end == grid_points - 1 {
            u_end
        } else {
            refine(u_end, u_end + step)?
        };
        intervals.push(Interval::new(left, right));
        i += 1;
    }
    if intervals.is_empty() {
        return Err(Error::NoFeasibleComponent);
    }

    Ok(TruncationRegion {
        intervals,
        nu0: f64::INFINITY,
        eta: eta.to_owned(),
        z0: z,
    })
}
