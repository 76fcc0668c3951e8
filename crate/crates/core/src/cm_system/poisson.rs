//! Canonical plus Lie-Poisson bracket, observables and Hamiltonian flows.

use super::{CMSystem, PhasePoint};
use crate::elliptic::{eisenstein2, eisenstein2_dz, C64};
use crate::error::{Error, Result};
use crate::lie_twist::CMat;

/// Base step of the central differences.
const FD_STEP: f64 = 1e-5;
/// Singularity guard radius in units of the step.
const GUARD: f64 = 10.0;

/// Functions on phase space with a known way to differentiate them.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    U(usize),
    V(usize),
    Spin(usize),
    /// Closed-form Hamiltonian; constrained spin components are ignored.
    Hamiltonian,
    Casimir,
    LaxEntry { z: C64, row: usize, col: usize },
    /// `tr L(z)^power`.
    TraceLaxPower { z: C64, power: u32 },
    Bracket(Box<Observable>, Box<Observable>),
}

/// Partial derivatives with respect to `u`, `v` and the spin coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    pub spin: Vec<C64>,
}

impl Gradient {
    fn zeros(sys: &CMSystem) -> Self {
        let zero = C64::new(0.0, 0.0);
        Self { u: vec![zero; sys.rank()], v: vec![zero; sys.rank()], spin: vec![zero; sys.dim()] }
    }
}

impl Observable {
    pub fn evaluate(&self, sys: &CMSystem, p: &PhasePoint) -> Result<C64> {
        let index = |v: &[C64], k: usize| v.get(k).copied().ok_or_else(|| Error::Dimension(format!("coordinate {k} out of range")));
        match self {
            Observable::U(k) => index(&p.u, *k),
            Observable::V(k) => index(&p.v, *k),
            Observable::Spin(a) => index(&p.spin, *a),
            Observable::Hamiltonian => sys.hamiltonian_unchecked(p),
            Observable::Casimir => Ok(sys.casimir2(p)),
            Observable::LaxEntry { z, row, col } => {
                let l = sys.lax(p, *z)?.matrix;
                if *row >= l.nrows() || *col >= l.ncols() {
                    return Err(Error::Dimension(format!("entry ({row}, {col}) out of range")));
                }
                Ok(l[(*row, *col)])
            }
            Observable::TraceLaxPower { z, power } => {
                let l = sys.lax(p, *z)?.matrix;
                let size = l.nrows();
                Ok((0..*power).fold(CMat::identity(size, size), |acc, _| acc * &l).trace())
            }
            Observable::Bracket(f, g) => poisson(sys, f, g, p),
        }
    }

    /// Analytic gradient where one is available, Richardson-extrapolated
    /// central differences otherwise (nested brackets).
    pub fn gradient(&self, sys: &CMSystem, p: &PhasePoint) -> Result<Gradient> {
        let mut grad = Gradient::zeros(sys);
        let one = C64::new(1.0, 0.0);
        let slot = match self {
            Observable::U(k) => grad.u.get_mut(*k),
            Observable::V(k) => grad.v.get_mut(*k),
            Observable::Spin(a) => grad.spin.get_mut(*a),
            Observable::Hamiltonian => return sys.hamiltonian_gradient(p),
            Observable::Casimir => {
                for (a, g) in sys.tla().generators.iter().enumerate() {
                    grad.spin[a] = p.spin[g.partner] * sys.pairing(a, g.partner);
                }
                return Ok(grad);
            }
            Observable::LaxEntry { z, row, col } => {
                let d = sys.lax_derivatives(p, *z)?;
                let size = sys.matrix_size();
                if *row >= size || *col >= size {
                    return Err(Error::Dimension(format!("entry ({row}, {col}) out of range")));
                }
                let pick = |m: &Vec<CMat>| m.iter().map(|x| x[(*row, *col)]).collect();
                return Ok(Gradient { u: pick(&d.u), v: pick(&d.v), spin: pick(&d.spin) });
            }
            Observable::TraceLaxPower { z, power } => {
                if *power == 0 {
                    return Ok(grad);
                }
                let l = sys.lax(p, *z)?.matrix;
                let size = l.nrows();
                let lead = (1..*power).fold(CMat::identity(size, size), |acc, _| acc * &l) * C64::new(*power as f64, 0.0);
                let d = sys.lax_derivatives(p, *z)?;
                let contract = |m: &Vec<CMat>| m.iter().map(|x| (&lead * x).trace()).collect();
                return Ok(Gradient { u: contract(&d.u), v: contract(&d.v), spin: contract(&d.spin) });
            }
            Observable::Bracket(..) => return self.gradient_fd(sys, p),
        };
        *slot.ok_or_else(|| Error::Dimension("coordinate index out of range".into()))? = one;
        Ok(grad)
    }
}

/// Central difference with one Richardson level.
fn richardson(f: impl Fn(f64) -> Result<C64>) -> Result<C64> {
    let d = |h: f64| -> Result<C64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let coarse = d(FD_STEP)?;
    let fine = d(FD_STEP / 2.0)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

impl Observable {
    /// Gradient by central differences with step `1e-5` and one Richardson
    /// level. Fails with `NonDifferentiable` when a resonance lies within ten
    /// steps of `u`.
    pub fn gradient_fd(&self, sys: &CMSystem, p: &PhasePoint) -> Result<Gradient> {
        finite_difference_gradient(sys, self, p)
    }
}

fn finite_difference_gradient(sys: &CMSystem, obs: &Observable, p: &PhasePoint) -> Result<Gradient> {
    let max_weight = sys.tla().generators.iter().flat_map(|g| g.weight.iter()).fold(0.0f64, |m, w| m.max(w.abs()));
    let reach = GUARD * FD_STEP * max_weight * (sys.rank() as f64).sqrt();
    if sys.resonance_distance(&p.u) < reach {
        return Err(Error::NonDifferentiable(format!("resonance within {reach:.1e} of u")));
    }
    let wrap = |r: Result<C64>| r.map_err(|e| Error::NonDifferentiable(e.to_string()));
    let mut grad = Gradient::zeros(sys);
    for k in 0..sys.rank() {
        grad.u[k] = wrap(richardson(|h| {
            let mut q = p.clone();
            q.u[k] += h;
            obs.evaluate(sys, &q)
        }))?;
        grad.v[k] = wrap(richardson(|h| {
            let mut q = p.clone();
            q.v[k] += h;
            obs.evaluate(sys, &q)
        }))?;
    }
    for a in 0..sys.dim() {
        grad.spin[a] = wrap(richardson(|h| {
            let mut q = p.clone();
            q.spin[a] += h;
            obs.evaluate(sys, &q)
        }))?;
    }
    Ok(grad)
}

/// `{f, g} = sum_j (df/dv_j dg/du_j - df/du_j dg/dv_j) + sum_ab {S_a, S_b} df/dS_a dg/dS_b`.
pub fn poisson(sys: &CMSystem, f: &Observable, g: &Observable, p: &PhasePoint) -> Result<C64> {
    let df = f.gradient(sys, p)?;
    let dg = g.gradient(sys, p)?;
    Ok(bracket_of_gradients(sys, &df, &dg, p))
}

fn bracket_of_gradients(sys: &CMSystem, df: &Gradient, dg: &Gradient, p: &PhasePoint) -> C64 {
    let mut acc: C64 = (0..sys.rank()).map(|j| df.v[j] * dg.u[j] - df.u[j] * dg.v[j]).sum();
    for (&(a, b), terms) in sys.spin_bracket_terms() {
        let weight = df.spin[a] * dg.spin[b];
        if weight == C64::new(0.0, 0.0) {
            continue;
        }
        let pi: C64 = terms.iter().map(|&(c, coef)| coef * p.spin[c]).sum();
        acc += pi * weight;
    }
    acc
}

impl CMSystem {
    /// Analytic gradient of the closed-form Hamiltonian.
    pub fn hamiltonian_gradient(&self, p: &PhasePoint) -> Result<Gradient> {
        self.check_point(p)?;
        self.check_nonresonant(&p.u)?;
        let mut grad = Gradient::zeros(self);
        grad.v.clone_from(&p.v);
        for a in self.kernel_indices() {
            let g = &self.tla.generators[a];
            let b = g.partner;
            let arg = self.kernel_argument(a, &p.u);
            let coupling = self.pairing(a, b);
            let e2 = eisenstein2(arg, &self.ctx)?;
            let de2 = eisenstein2_dz(arg, &self.ctx)?;
            // d arg / d u_k = -weight_a[k]
            for (k, w) in g.weight.iter().enumerate() {
                grad.u[k] += p.spin[a] * p.spin[b] * coupling * de2 * (0.5 * w);
            }
            grad.spin[a] -= p.spin[b] * coupling * e2 * 0.5;
            grad.spin[b] -= p.spin[a] * coupling * e2 * 0.5;
        }
        Ok(grad)
    }

    /// Time derivative `x' = {H, x}` of every coordinate.
    fn velocity(&self, p: &PhasePoint) -> Result<PhasePoint> {
        let grad = self.hamiltonian_gradient(p)?;
        let zero = C64::new(0.0, 0.0);
        let mut spin = vec![zero; self.dim()];
        for (&(a, c), terms) in self.spin_bracket_terms() {
            if grad.spin[a] == zero {
                continue;
            }
            let pi: C64 = terms.iter().map(|&(d, coef)| coef * p.spin[d]).sum();
            spin[c] += pi * grad.spin[a];
        }
        Ok(PhasePoint { u: grad.v.clone(), v: grad.u.iter().map(|x| -x).collect(), spin })
    }
}

fn axpy(p: &PhasePoint, h: f64, d: &PhasePoint) -> PhasePoint {
    let comb = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x + y * h).collect();
    PhasePoint { u: comb(&p.u, &d.u), v: comb(&p.v, &d.v), spin: comb(&p.spin, &d.spin) }
}

fn rk4_step(sys: &CMSystem, p: &PhasePoint, dt: f64) -> Result<PhasePoint> {
    let k1 = sys.velocity(p)?;
    let k2 = sys.velocity(&axpy(p, dt / 2.0, &k1))?;
    let k3 = sys.velocity(&axpy(p, dt / 2.0, &k2))?;
    let k4 = sys.velocity(&axpy(p, dt, &k3))?;
    let mut out = axpy(p, dt / 6.0, &k1);
    out = axpy(&out, dt / 3.0, &k2);
    out = axpy(&out, dt / 3.0, &k3);
    Ok(axpy(&out, dt / 6.0, &k4))
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    /// Phase points at steps `0..=steps`.
    pub trajectory: Vec<PhasePoint>,
    /// `max_t |H(t) - H(0)| / |H(0)|`.
    pub energy_drift: f64,
    /// `max_t |tr L(z0)^2 (t) - tr L(z0)^2 (0)| / |tr L(z0)^2 (0)|`.
    pub trace_drift: f64,
    pub z0: C64,
}

/// Fixed-step RK4 integration of `x' = {H, x}` from a constrained phase.
pub fn flow(sys: &CMSystem, p: &PhasePoint, dt: f64, steps: usize) -> Result<FlowResult> {
    if !(dt > 0.0 && dt.is_finite()) || steps == 0 {
        return Err(Error::InvalidConfig("flow needs dt > 0 and at least one step".into()));
    }
    let h0 = sys.hamiltonian_closed(p)?;
    let z0 = C64::new(0.27, 0.0) + sys.tau() * 0.4;
    let trace = |q: &PhasePoint| -> Result<C64> {
        let l = sys.lax(q, z0)?.matrix;
        Ok((&l * &l).trace())
    };
    let t0 = trace(p)?;
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(p.clone());
    let (mut energy_drift, mut trace_drift) = (0.0f64, 0.0f64);
    let mut cur = p.clone();
    for step in 1..=steps {
        let hit = |e: Error| Error::SingularityHit { step, reason: e.to_string() };
        cur = rk4_step(sys, &cur, dt).map_err(hit)?;
        energy_drift = energy_drift.max((sys.hamiltonian_unchecked(&cur).map_err(hit)? - h0).norm() / h0.norm().max(f64::MIN_POSITIVE));
        trace_drift = trace_drift.max((trace(&cur).map_err(hit)? - t0).norm() / t0.norm().max(f64::MIN_POSITIVE));
        trajectory.push(cur.clone());
    }
    Ok(FlowResult { trajectory, energy_drift, trace_drift, z0 })
}

fn distance(a: &PhasePoint, b: &PhasePoint) -> f64 {
    a.u.iter()
        .zip(&b.u)
        .chain(a.v.iter().zip(&b.v))
        .chain(a.spin.iter().zip(&b.spin))
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `|x_dt - x_{dt/2}| / |x_{dt/2} - x_{dt/4}|` at time `dt * steps`; tends to
/// 16 for a fourth-order integrator.
pub fn flow_convergence_ratio(sys: &CMSystem, p: &PhasePoint, dt: f64, steps: usize) -> Result<f64> {
    let end = |k: usize| -> Result<PhasePoint> {
        let mut traj = flow(sys, p, dt / k as f64, steps * k)?.trajectory;
        Ok(traj.pop().expect("nonempty trajectory"))
    };
    let (x1, x2, x4) = (end(1)?, end(2)?, end(4)?);
    Ok(distance(&x1, &x2) / distance(&x2, &x4))
}
