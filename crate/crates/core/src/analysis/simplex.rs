//! Nelder–Mead descent on the unit sphere through recentered tangent charts.

use nalgebra::DVector;

const ROUNDS: usize = 4;
const INITIAL_STEP: f64 = 0.05;

/// Orthonormal basis of the Euclidean complement of the unit vector `c`.
fn tangent_basis(c: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = c.len();
    let skip = c.iamax();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    for k in (0..n).filter(|&k| k != skip) {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        e -= c * c[k];
        for b in &basis {
            let proj = b.dot(&e);
            e -= b * proj;
        }
        basis.push(e.normalize());
    }
    basis
}

struct Chart {
    center: DVector<f64>,
    basis: Vec<DVector<f64>>,
}

impl Chart {
    fn new(center: DVector<f64>) -> Self {
        let basis = tangent_basis(&center);
        Self { center, basis }
    }

    fn point(&self, y: &[f64]) -> DVector<f64> {
        let mut v = self.center.clone();
        for (b, yi) in self.basis.iter().zip(y) {
            v += b * *yi;
        }
        v.normalize()
    }
}

fn sanitize(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

/// One Nelder–Mead run in `chart`; returns the best chart coordinates, their
/// value, and the final simplex spread.
fn nelder_mead(
    objective: &impl Fn(&DVector<f64>) -> f64,
    chart: &Chart,
    step: f64,
    iterations: usize,
) -> (Vec<f64>, f64, f64) {
    let m = chart.basis.len();
    let eval = |y: &[f64]| sanitize(objective(&chart.point(y)));
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=m)
        .map(|i| {
            let mut y = vec![0.0; m];
            if i > 0 {
                y[i - 1] = step;
            }
            let f = eval(&y);
            (y, f)
        })
        .collect();

    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };

    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[m].clone();
        let mut centroid = vec![0.0; m];
        for (y, _) in &simplex[..m] {
            for (c, yi) in centroid.iter_mut().zip(y) {
                *c += yi / m as f64;
            }
        }
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded);
            simplex[m] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[m - 1].1 {
            simplex[m] = (reflected, fr);
            continue;
        }
        let (contracted, accept_below) = if fr < worst.1 {
            (combine(&centroid, &reflected, 0.5), fr)
        } else {
            (combine(&centroid, &worst.0, 0.5), worst.1)
        };
        let fc = eval(&contracted);
        if fc < accept_below {
            simplex[m] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            vertex.0 = combine(&best, &vertex.0, 0.5);
            vertex.1 = eval(&vertex.0);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let spread = simplex[1..]
        .iter()
        .map(|(y, _)| {
            y.iter()
                .zip(&simplex[0].0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let (y, f) = simplex.swap_remove(0);
    (y, f, spread)
}

/// Minimizes `objective` over the unit sphere starting at the unit vector
/// `start`, spending `iterations` simplex steps across a few recentered charts.
pub(crate) fn minimize_on_sphere(
    objective: impl Fn(&DVector<f64>) -> f64,
    start: &DVector<f64>,
    iterations: usize,
) -> (DVector<f64>, f64) {
    let mut best_v = start.clone();
    let mut best_f = sanitize(objective(start));
    if start.len() < 2 {
        return (best_v, best_f);
    }
    let mut step = INITIAL_STEP;
    let per_round = iterations.div_ceil(ROUNDS);
    let mut remaining = iterations;
    while remaining > 0 {
        let budget = per_round.min(remaining);
        remaining -= budget;
        let chart = Chart::new(best_v.clone());
        let (y, f, spread) = nelder_mead(&objective, &chart, step, budget);
        if f < best_f {
            best_f = f;
            best_v = chart.point(&y);
        }
        step = spread.clamp(1e-10, INITIAL_STEP);
    }
    (best_v, best_f)
}
