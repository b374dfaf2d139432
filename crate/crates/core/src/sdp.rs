//! The basic SDP relaxation of an at-most-binary instance.
//!
//! The solver runs ADMM on the full Gram matrix `G` (rows indexed by `x·|D| + a`),
//! alternating the PSD projection with the projection onto the affine/nonnegative
//! set `K`. `K` is a product of simplices: every off-diagonal block of `G` is a
//! nonnegative `|D|×|D|` matrix summing to 1, every diagonal block is diagonal with
//! unit trace. Iterates are made exactly feasible by a repair step on a reduced
//! Gram matrix over `{u, x_0, …, x_{|D|−2}}` (see [`repair`]) and certified by a
//! dual upper bound. ADMM can stall on degenerate optima; small models then get a
//! log-barrier interior-point finish over the same reduced Gram matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::instance::{Assignment, Domain, Instance};
use crate::prague::ValueSet;

pub const DEFAULT_ETA: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SdpModel {
    instance: Instance,
    objective: DMatrix<f64>,
}

/// Objective `(1/m)·⟨C, G⟩`: unary `(x, R)` adds `C[xa,xa] += 1` for `a ∈ R`,
/// binary `((x,y), R)` adds `1/2` to both `C[xa,yb]` and `C[yb,xa]` for `(a,b) ∈ R`.
pub fn build_sdp(instance: &Instance) -> Result<SdpModel> {
    if instance.is_degenerate() {
        return Err(Error::DegenerateInstance);
    }
    for (index, c) in instance.constraints().iter().enumerate() {
        if c.scope.len() > 2 {
            return Err(Error::UnsupportedArity {
                index,
                arity: c.scope.len(),
            });
        }
    }
    let d = instance.domain().size();
    let size = instance.num_variables() * d;
    let mut c = DMatrix::zeros(size, size);
    let scale = 1.0 / instance.num_constraints() as f64;
    for con in instance.constraints() {
        match con.scope[..] {
            [x] => {
                for t in con.relation.tuples() {
                    c[(x * d + t[0], x * d + t[0])] += scale;
                }
            }
            [x, y] => {
                for t in con.relation.tuples() {
                    let (i, j) = (x * d + t[0], y * d + t[1]);
                    c[(i, j)] += 0.5 * scale;
                    c[(j, i)] += 0.5 * scale;
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(SdpModel {
        instance: instance.clone(),
        objective: c,
    })
}

impl SdpModel {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn objective_matrix(&self) -> &DMatrix<f64> {
        &self.objective
    }

    pub fn index(&self, x: usize, a: usize) -> usize {
        x * self.instance.domain().size() + a
    }

    /// Objective of arbitrary vectors, straight from the constraint list.
    pub fn objective_value(&self, v: &SdpVectors) -> f64 {
        sdp_objective(&self.instance, v)
    }
}

pub fn sdp_objective(instance: &Instance, v: &SdpVectors) -> f64 {
    let total: f64 = instance
        .constraints()
        .iter()
        .map(|c| match c.scope[..] {
            [x] => c.relation.tuples().iter().map(|t| v.dot(x, t[0], x, t[0])).sum::<f64>(),
            [x, y] => c.relation.tuples().iter().map(|t| v.dot(x, t[0], y, t[1])).sum(),
            _ => 0.0,
        })
        .sum();
    total / instance.num_constraints().max(1) as f64
}

/// One real vector per (variable, value), stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpVectors {
    num_variables: usize,
    domain: Domain,
    dimension: usize,
    data: Vec<f64>,
    pub objective: Option<f64>,
    /// Certified upper bound on the SDP optimum, when the solver produced one.
    pub upper_bound: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl SdpVectors {
    pub fn new(num_variables: usize, domain: Domain, dimension: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_variables * domain.size() * dimension {
            return Err(Error::Parse(format!(
                "expected {} coordinates, got {}",
                num_variables * domain.size() * dimension,
                data.len()
            )));
        }
        Ok(SdpVectors {
            num_variables,
            domain,
            dimension,
            data,
            objective: None,
            upper_bound: None,
            converged: true,
            iterations: 0,
        })
    }

    /// `x_a = u` for `a = F(x)` and `0` otherwise, with `u` a unit vector.
    pub fn integral(domain: Domain, assignment: &Assignment) -> Self {
        let d = domain.size();
        let mut data = vec![0.0; assignment.len() * d];
        for (x, &a) in assignment.values().iter().enumerate() {
            data[x * d + a] = 1.0;
        }
        SdpVectors {
            num_variables: assignment.len(),
            domain,
            dimension: 1,
            data,
            objective: None,
            upper_bound: None,
            converged: true,
            iterations: 0,
        }
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vector(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.domain.size() + a) * self.dimension;
        &self.data[start..start + self.dimension]
    }

    pub fn vector_mut(&mut self, x: usize, a: usize) -> &mut [f64] {
        let start = (x * self.domain.size() + a) * self.dimension;
        &mut self.data[start..start + self.dimension]
    }

    pub fn dot(&self, x: usize, a: usize, y: usize, b: usize) -> f64 {
        dot(self.vector(x, a), self.vector(y, b))
    }

    pub fn norm_sq(&self, x: usize, a: usize) -> f64 {
        self.dot(x, a, x, a)
    }

    /// `x_A = Σ_{a∈A} x_a`.
    pub fn subset_vector(&self, x: usize, set: ValueSet) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for a in self.domain.values().filter(|&a| set >> a & 1 == 1) {
            for (o, v) in out.iter_mut().zip(self.vector(x, a)) {
                *o += v;
            }
        }
        out
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FeasibilityReport {
    /// `max(0, −min ⟨x_a, y_b⟩)` over distinct variables.
    pub sdp1: f64,
    /// `max |⟨x_a, x_b⟩|`, `a ≠ b`.
    pub sdp2: f64,
    /// Largest of `‖Σ x_a − Σ y_a‖` and `|‖Σ x_a‖² − 1|`.
    pub sdp3: f64,
    pub tol: f64,
    pub pass: bool,
}

impl FeasibilityReport {
    pub fn max_residual(&self) -> f64 {
        self.sdp1.max(self.sdp2).max(self.sdp3)
    }
}

pub fn check_sdp_feasibility(v: &SdpVectors, tol: f64) -> FeasibilityReport {
    let n = v.num_variables();
    let d = v.domain().size();
    let mut sdp1: f64 = 0.0;
    let mut sdp2: f64 = 0.0;
    let mut sdp3: f64 = 0.0;
    let sums: Vec<Vec<f64>> = (0..n).map(|x| v.subset_vector(x, (1u32 << d) - 1)).collect();
    for x in 0..n {
        for a in 0..d {
            for b in a + 1..d {
                sdp2 = sdp2.max(v.dot(x, a, x, b).abs());
            }
            for y in x + 1..n {
                for b in 0..d {
                    sdp1 = sdp1.max(0.0 - v.dot(x, a, y, b));
                }
            }
        }
        sdp3 = sdp3.max((dot(&sums[x], &sums[x]) - 1.0).abs());
        if x > 0 {
            let diff: f64 = sums[x]
                .iter()
                .zip(&sums[0])
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            sdp3 = sdp3.max(diff);
        }
    }
    FeasibilityReport {
        sdp1,
        sdp2,
        sdp3,
        tol,
        pass: sdp1 <= tol && sdp2 <= tol && sdp3 <= tol,
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LpValues {
    /// `λ_x(a) = ‖x_a‖²`.
    pub unary: Vec<Vec<f64>>,
    /// `λ_C(a, b) = ⟨x_a, y_b⟩` for each binary constraint, row-major; `None` for unary ones.
    pub binary: Vec<Option<Vec<f64>>>,
    pub objective: f64,
}

/// Reads LP marginals off SDP vectors and validates the LP constraints within `tol`.
pub fn lp_from_sdp(v: &SdpVectors, instance: &Instance, tol: f64) -> Result<LpValues> {
    let d = v.domain().size();
    if v.domain() != instance.domain() || v.num_variables() != instance.num_variables() {
        return Err(Error::LpValidation("vectors do not match the instance shape".into()));
    }
    let unary: Vec<Vec<f64>> = (0..v.num_variables())
        .map(|x| (0..d).map(|a| v.norm_sq(x, a)).collect())
        .collect();
    for (x, row) in unary.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::LpValidation(format!("sum of lambda_{x} is {s}, expected 1")));
        }
    }
    let mut binary = Vec::with_capacity(instance.num_constraints());
    let mut total = 0.0;
    for (index, c) in instance.constraints().iter().enumerate() {
        match c.scope[..] {
            [x] => {
                total += c.relation.tuples().iter().map(|t| unary[x][t[0]]).sum::<f64>();
                binary.push(None);
            }
            [x, y] => {
                let lam: Vec<f64> = (0..d * d).map(|k| v.dot(x, k / d, y, k % d)).collect();
                for a in 0..d {
                    let row: f64 = (0..d).map(|b| lam[a * d + b]).sum();
                    let col: f64 = (0..d).map(|b| lam[b * d + a]).sum();
                    if (row - unary[x][a]).abs() > tol {
                        return Err(Error::LpValidation(format!(
                            "constraint {index}: marginal of variable {x} at value {a} is {row}, lambda is {}",
                            unary[x][a]
                        )));
                    }
                    if (col - unary[y][a]).abs() > tol {
                        return Err(Error::LpValidation(format!(
                            "constraint {index}: marginal of variable {y} at value {a} is {col}, lambda is {}",
                            unary[y][a]
                        )));
                    }
                }
                total += c.relation.tuples().iter().map(|t| lam[t[0] * d + t[1]]).sum::<f64>();
                binary.push(Some(lam));
            }
            _ => {
                return Err(Error::UnsupportedArity {
                    index,
                    arity: c.scope.len(),
                })
            }
        }
    }
    let objective = total / instance.num_constraints().max(1) as f64;
    let sdp = sdp_objective(instance, v);
    if objective < sdp - tol {
        return Err(Error::LpValidation(format!(
            "LP objective {objective} below SDP objective {sdp}"
        )));
    }
    Ok(LpValues {
        unary,
        binary,
        objective,
    })
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Iterations between repair/bound evaluations.
    pub check_every: usize,
    pub rho: Option<f64>,
    /// Largest weight the repair step may give the product solution in an answer
    /// reported as converged; every zero cross product moves by about this much.
    pub eta: f64,
    /// Anderson acceleration memory; 0 runs plain ADMM.
    pub anderson_memory: usize,
    /// Largest reduced parameter count for the interior-point finish after an
    /// unconverged ADMM run; 0 disables it.
    pub barrier_max_params: usize,
    pub barrier_max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 20_000,
            check_every: 50,
            rho: None,
            eta: DEFAULT_ETA,
            anderson_memory: 5,
            barrier_max_params: 400,
            barrier_max_newton: 500,
        }
    }
}

pub fn solve_sdp(model: &SdpModel, delta: f64) -> Result<SdpVectors> {
    solve_sdp_with(model, delta, &SolverConfig::default())
}

/// Solves to objective gap `delta` with an iterate that is feasible to within
/// `config.eta` before repair. ADMM (with Anderson acceleration) runs first; if it
/// has not got there when the budget runs out and the model is small, a barrier
/// method finishes. Otherwise the best repaired iterate comes back with
/// `converged = false`.
pub fn solve_sdp_with(model: &SdpModel, delta: f64, config: &SolverConfig) -> Result<SdpVectors> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    let inst = &model.instance;
    let n = inst.num_variables();
    let d = inst.domain().size();
    let size = n * d;
    let c = &model.objective;
    if size == 0 {
        return Err(Error::DegenerateInstance);
    }

    let mut z = product_gram(n, d);
    let mut u = DMatrix::zeros(size, size);
    let mut rho = config
        .rho
        .unwrap_or_else(|| (c.norm() / (size as f64).sqrt()).max(1e-4));
    let reduced0 = reduced_product(n, d);
    let lmin0 = SymmetricEigen::new(reduced0.clone()).eigenvalues.min();

    // best iterate whose repair moved it by at most eta, and best overall
    let mut best_clean: Option<SdpVectors> = None;
    let mut best_any: Option<SdpVectors> = None;
    let mut best_ub = f64::INFINITY;
    let mut iterations = 0;
    let mut accel = Anderson::new(config.anderson_memory);
    // plain image of the last base point, used when an accelerated point is rejected
    let mut fallback: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut last_plain_residual = f64::INFINITY;
    while iterations < config.max_iterations {
        iterations += 1;
        let (g, z_next, u_next) = admm_step(&z, &u, c, rho, n, d);
        let residual = ((&z_next - &z).norm_squared() + (&u_next - &u).norm_squared()).sqrt();
        if let Some((fz, fu)) = fallback.take() {
            if residual > ANDERSON_SAFEGUARD * last_plain_residual {
                // the extrapolated point made things worse: resume from the plain step
                accel.reset();
                z = fz;
                u = fu;
                continue;
            }
        }
        last_plain_residual = residual;
        let z_prev = std::mem::replace(&mut z, z_next);
        let u_prev = std::mem::replace(&mut u, u_next);

        if iterations % config.check_every == 0 || iterations == config.max_iterations {
            let (mut v, theta) = repair(&g, n, d, &reduced0, lmin0);
            let obj = sdp_objective(inst, &v);
            v.objective = Some(obj);
            let y = &u * rho;
            let ub = dual_bound(c, &y, n, d).min(dual_bound(c, &(-y.clone()), n, d));
            best_ub = best_ub.min(ub);
            let slot = if theta <= config.eta {
                &mut best_clean
            } else {
                &mut best_any
            };
            if slot.as_ref().is_none_or(|b| obj > objective_of(b)) {
                *slot = Some(v);
            }
            if best_clean.as_ref().is_some_and(|b| best_ub - objective_of(b) <= delta) {
                break;
            }
            // residual balancing; the fixed-point map changes with rho
            let r = (&g - &z).norm();
            let s = rho * (&z - &z_prev).norm();
            if r > 10.0 * s {
                rho *= 2.0;
                u /= 2.0;
                accel.reset();
            } else if s > 10.0 * r {
                rho /= 2.0;
                u *= 2.0;
                accel.reset();
            }
        }
        if let Some((az, au)) = accel.extrapolate(&z_prev, &u_prev, &z, &u) {
            fallback = Some((std::mem::replace(&mut z, az), std::mem::replace(&mut u, au)));
        }
    }
    let mut clean = best_clean.is_some();
    let mut out = best_clean.or(best_any).expect("at least one check ran");
    if !clean || best_ub - objective_of(&out) > delta {
        // ADMM stalls on degenerate optima; small models get an interior-point finish
        let barrier = Barrier::new(model);
        if barrier.num_params() <= config.barrier_max_params {
            if let Some(res) = barrier.solve(delta, config.barrier_max_newton) {
                iterations += res.newton_steps;
                best_ub = best_ub.min(res.upper_bound);
                let mut v = vectors_from_reduced(res.m, n, d);
                let obj = sdp_objective(inst, &v);
                if !clean || obj > objective_of(&out) {
                    v.objective = Some(obj);
                    out = v;
                    clean = true;
                }
            }
        }
    }
    out.upper_bound = Some(best_ub);
    out.converged = clean && best_ub - objective_of(&out) <= delta;
    out.iterations = iterations;
    Ok(out)
}

/// One ADMM iteration: `(G, Z', U')`.
fn admm_step(
    z: &DMatrix<f64>,
    u: &DMatrix<f64>,
    c: &DMatrix<f64>,
    rho: f64,
    n: usize,
    d: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let g = project_psd(z - u + c / rho);
    let mut z_next = &g + u;
    project_k(&mut z_next, n, d);
    let u_next = u + &g - &z_next;
    (g, z_next, u_next)
}

/// An accelerated point is rejected when its plain step is this much longer than
/// the previous one.
const ANDERSON_SAFEGUARD: f64 = 1.0;

/// Type-II Anderson acceleration of the fixed-point map `(Z, U) ↦ step(Z, U)`.
struct Anderson {
    memory: usize,
    /// `(w_k, T(w_k) − w_k)` flattened, oldest first.
    history: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Anderson {
            memory,
            history: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.history.clear();
    }

    /// Records `w = (z, u) ↦ T(w) = (tz, tu)` and returns the extrapolated point,
    /// once at least two pairs are stored.
    fn extrapolate(
        &mut self,
        z: &DMatrix<f64>,
        u: &DMatrix<f64>,
        tz: &DMatrix<f64>,
        tu: &DMatrix<f64>,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        if self.memory == 0 {
            return None;
        }
        let tw: Vec<f64> = tz.iter().chain(tu.iter()).copied().collect();
        let w: Vec<f64> = z.iter().chain(u.iter()).copied().collect();
        let f: Vec<f64> = tw.iter().zip(&w).map(|(a, b)| a - b).collect();
        self.history.push((tw, f));
        if self.history.len() > self.memory + 1 {
            self.history.remove(0);
        }
        let k = self.history.len();
        if k < 2 {
            return None;
        }
        let m = k - 1;
        let len = self.history[0].0.len();
        let df = DMatrix::from_fn(len, m, |i, j| self.history[j + 1].1[i] - self.history[j].1[i]);
        let dg = DMatrix::from_fn(len, m, |i, j| self.history[j + 1].0[i] - self.history[j].0[i]);
        let last = DVector::from_column_slice(&self.history[k - 1].1);
        let mut gram = df.transpose() * &df;
        let reg = 1e-10 * gram.trace().max(f64::MIN_POSITIVE);
        for i in 0..m {
            gram[(i, i)] += reg;
        }
        let gamma = gram.cholesky()?.solve(&(df.transpose() * &last));
        let tw = DVector::from_column_slice(&self.history[k - 1].0);
        let next = tw - dg * gamma;
        if next.iter().any(|v| !v.is_finite()) {
            self.reset();
            return None;
        }
        let s = z.nrows();
        let half = s * s;
        let az = DMatrix::from_column_slice(s, s, &next.as_slice()[..half]);
        let au = DMatrix::from_column_slice(s, s, &next.as_slice()[half..]);
        Some((az, au))
    }
}

fn project_psd(mut m: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut m);
    let eig = SymmetricEigen::new(m);
    let mut q = eig.eigenvectors;
    let vals = eig.eigenvalues;
    for (j, &l) in vals.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        q.column_mut(j).scale_mut(s);
    }
    &q * q.transpose()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Euclidean projection onto `{w ≥ 0, Σ w = 1}`.
pub(crate) fn project_simplex(w: &mut [f64]) {
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    for v in w.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

fn project_k(m: &mut DMatrix<f64>, n: usize, d: usize) {
    let mut buf = vec![0.0; d * d];
    for x in 0..n {
        let diag: Vec<f64> = (0..d).map(|a| m[(x * d + a, x * d + a)]).collect();
        let mut diag = diag;
        project_simplex(&mut diag);
        for a in 0..d {
            for b in 0..d {
                m[(x * d + a, x * d + b)] = if a == b { diag[a] } else { 0.0 };
            }
        }
        for y in x + 1..n {
            for a in 0..d {
                for b in 0..d {
                    buf[a * d + b] = 0.5 * (m[(x * d + a, y * d + b)] + m[(y * d + b, x * d + a)]);
                }
            }
            project_simplex(&mut buf);
            for a in 0..d {
                for b in 0..d {
                    m[(x * d + a, y * d + b)] = buf[a * d + b];
                    m[(y * d + b, x * d + a)] = buf[a * d + b];
                }
            }
        }
    }
}

/// Gram matrix of independent uniform marginals: diagonal `1/|D|`, cross `1/|D|²`.
fn product_gram(n: usize, d: usize) -> DMatrix<f64> {
    let size = n * d;
    let df = d as f64;
    DMatrix::from_fn(size, size, |i, j| {
        if i / d == j / d {
            if i == j {
                1.0 / df
            } else {
                0.0
            }
        } else {
            1.0 / (df * df)
        }
    })
}

/// `max_{G ⪰ 0, tr G = |V|} ⟨C − Y, G⟩ + max_{Z ∈ K} ⟨Y, Z⟩`, valid for any symmetric `Y`.
fn dual_bound(c: &DMatrix<f64>, y: &DMatrix<f64>, n: usize, d: usize) -> f64 {
    let mut diff = c - y;
    symmetrize(&mut diff);
    let lmax = SymmetricEigen::new(diff).eigenvalues.max();
    let mut total = n as f64 * lmax;
    for x in 0..n {
        total += (0..d)
            .map(|a| y[(x * d + a, x * d + a)])
            .fold(f64::NEG_INFINITY, f64::max);
        for z in x + 1..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..d {
                for b in 0..d {
                    best = best.max(y[(x * d + a, z * d + b)] + y[(z * d + b, x * d + a)]);
                }
            }
            total += best;
        }
    }
    total
}

fn reduced_index(x: usize, a: usize, d: usize) -> usize {
    1 + x * (d - 1) + a
}

fn reduced_product(n: usize, d: usize) -> DMatrix<f64> {
    let r = d - 1;
    let size = 1 + n * r;
    let df = d as f64;
    let mut m = DMatrix::zeros(size, size);
    m[(0, 0)] = 1.0;
    for x in 0..n {
        for a in 0..r {
            let i = reduced_index(x, a, d);
            m[(0, i)] = 1.0 / df;
            m[(i, 0)] = 1.0 / df;
            m[(i, i)] = 1.0 / df;
            for y in 0..n {
                if y == x {
                    continue;
                }
                for b in 0..r {
                    m[(i, reduced_index(y, b, d))] = 1.0 / (df * df);
                }
            }
        }
    }
    m
}

/// Nonnegativity slacks of all cross products, as linear functions of the reduced Gram.
fn slacks(m: &DMatrix<f64>, n: usize, d: usize) -> Vec<f64> {
    let r = d - 1;
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let mut all = 0.0;
            for a in 0..r {
                let mut row = 0.0;
                for b in 0..r {
                    let v = m[(reduced_index(x, a, d), reduced_index(y, b, d))];
                    out.push(v);
                    row += v;
                    all += v;
                }
                out.push(m[(reduced_index(x, a, d), 0)] - row);
            }
            for b in 0..r {
                let col: f64 = (0..r)
                    .map(|a| m[(reduced_index(x, a, d), reduced_index(y, b, d))])
                    .sum();
                out.push(m[(reduced_index(y, b, d), 0)] - col);
            }
            let ux: f64 = (0..r).map(|a| m[(0, reduced_index(x, a, d))]).sum();
            let uy: f64 = (0..r).map(|b| m[(0, reduced_index(y, b, d))]).sum();
            out.push(m[(0, 0)] - ux - uy + all);
        }
    }
    out
}

/// Maps an approximately feasible full Gram matrix to exactly feasible vectors:
/// reduce to the basis `{u, x_a : a < |D|−1}` (the last value is `u − Σ x_a`),
/// impose the equalities, then mix with the strictly feasible product solution just
/// enough to restore positive semidefiniteness and nonnegativity.
fn repair(g: &DMatrix<f64>, n: usize, d: usize, m0: &DMatrix<f64>, lmin0: f64) -> (SdpVectors, f64) {
    let r = d - 1;
    let size = 1 + n * r;
    let mut m = DMatrix::zeros(size, size);
    m[(0, 0)] = 1.0;
    for x in 0..n {
        for a in 0..r {
            let i = reduced_index(x, a, d);
            let col = x * d + a;
            let ux: f64 = (0..n)
                .map(|y| (0..d).map(|b| g[(y * d + b, col)]).sum::<f64>())
                .sum::<f64>()
                / n as f64;
            let val = 0.5 * (ux + g[(col, col)]);
            m[(0, i)] = val;
            m[(i, 0)] = val;
            m[(i, i)] = val;
            for y in x + 1..n {
                for b in 0..r {
                    let j = reduced_index(y, b, d);
                    let v = 0.5 * (g[(col, y * d + b)] + g[(y * d + b, col)]);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
    }
    let lmin = SymmetricEigen::new(m.clone()).eigenvalues.min();
    let mut theta: f64 = 0.0;
    if lmin < 0.0 {
        theta = theta.max(-lmin / (lmin0 - lmin));
    }
    let s = slacks(&m, n, d);
    let s0 = slacks(m0, n, d);
    for (si, s0i) in s.iter().zip(&s0) {
        if *si < 0.0 {
            theta = theta.max(-si / (s0i - si));
        }
    }
    if theta > 0.0 {
        theta = (theta * (1.0 + 1e-6) + 1e-15).min(1.0);
        m = &m * (1.0 - theta) + m0 * theta;
    }
    (vectors_from_reduced(m, n, d), theta)
}

fn objective_of(v: &SdpVectors) -> f64 {
    v.objective.unwrap_or(f64::NEG_INFINITY)
}

/// Vectors realizing a reduced Gram matrix over `{u, x_a : a < |D|−1}`; the last
/// value of each variable is `u − Σ x_a`.
fn vectors_from_reduced(m: DMatrix<f64>, n: usize, d: usize) -> SdpVectors {
    let r = d - 1;
    let size = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut basis = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        basis.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    let dim = size;
    let row = |i: usize| -> Vec<f64> { (0..dim).map(|k| basis[(i, k)]).collect() };
    let u = row(0);
    let mut data = Vec::with_capacity(n * d * dim);
    for x in 0..n {
        let mut last = u.clone();
        for a in 0..r {
            let v = row(reduced_index(x, a, d));
            for (l, vi) in last.iter_mut().zip(&v) {
                *l -= vi;
            }
            data.extend(v);
        }
        data.extend(last);
    }
    SdpVectors {
        num_variables: n,
        domain: Domain::new(d).expect("positive domain"),
        dimension: dim,
        data,
        objective: None,
        upper_bound: None,
        converged: false,
        iterations: 0,
    }
}

/// Affine function `c + Σ coef·p_k` of the barrier parameters.
#[derive(Clone, Debug, Default)]
struct Affine {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Affine {
    fn eval(&self, p: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(k, c)| c * p[k]).sum::<f64>()
    }

    fn compact(mut self) -> Self {
        self.terms.sort_unstable_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (k, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
        self
    }
}

/// Log-barrier interior-point method on the reduced Gram matrix. Parameters are
/// `m_i = M[0,i] = M[i,i]` and the cross entries `M[i,j]` between different
/// variables; every one of them lies in `[0, 1]`, which makes the dual bound below
/// valid even off the central path.
struct Barrier {
    d: usize,
    size: usize,
    /// `param[i·size + j]` for the entry `(i, j)`, if it is a free parameter.
    param: Vec<Option<usize>>,
    /// Entries `(i, j)` of each parameter's basis matrix `A_k`.
    basis: Vec<Vec<(usize, usize)>>,
    objective: Affine,
    slacks: Vec<Affine>,
}

struct BarrierOutcome {
    m: DMatrix<f64>,
    upper_bound: f64,
    newton_steps: usize,
}

impl Barrier {
    fn new(model: &SdpModel) -> Self {
        let inst = &model.instance;
        let n = inst.num_variables();
        let d = inst.domain().size();
        let r = d - 1;
        let size = 1 + n * r;
        let var = |i: usize| (i - 1) / r;
        let mut param = vec![None; size * size];
        let mut basis = Vec::new();
        for i in 1..size {
            for (a, b) in [(0, i), (i, 0), (i, i)] {
                param[a * size + b] = Some(basis.len());
            }
            basis.push(vec![(0, i), (i, 0), (i, i)]);
        }
        for i in 1..size {
            for j in i + 1..size {
                if var(i) != var(j) {
                    param[i * size + j] = Some(basis.len());
                    param[j * size + i] = Some(basis.len());
                    basis.push(vec![(i, j), (j, i)]);
                }
            }
        }
        // full vector (x, a) in the reduced basis
        let coords = |x: usize, a: usize| -> Vec<(usize, f64)> {
            if a < r {
                vec![(reduced_index(x, a, d), 1.0)]
            } else {
                std::iter::once((0, 1.0))
                    .chain((0..r).map(|b| (reduced_index(x, b, d), -1.0)))
                    .collect()
            }
        };
        let dot = |x: usize, a: usize, y: usize, b: usize| -> Affine {
            let mut f = Affine::default();
            for (i, alpha) in coords(x, a) {
                for (j, beta) in coords(y, b) {
                    match param[i * size + j] {
                        Some(k) => f.terms.push((k, alpha * beta)),
                        None if i == 0 && j == 0 => f.constant += alpha * beta,
                        None => {} // orthogonal values of one variable
                    }
                }
            }
            f.compact()
        };
        let c = &model.objective;
        let mut objective = Affine::default();
        for x in 0..n {
            for a in 0..d {
                for y in 0..n {
                    for b in 0..d {
                        let w = c[(x * d + a, y * d + b)];
                        if w != 0.0 {
                            let f = dot(x, a, y, b);
                            objective.constant += w * f.constant;
                            objective.terms.extend(f.terms.iter().map(|&(k, v)| (k, w * v)));
                        }
                    }
                }
            }
        }
        let mut slacks = Vec::new();
        for x in 0..n {
            for y in x + 1..n {
                for a in 0..d {
                    for b in 0..d {
                        slacks.push(dot(x, a, y, b));
                    }
                }
            }
        }
        Barrier {
            d,
            size,
            param,
            basis,
            objective: objective.compact(),
            slacks,
        }
    }

    fn num_params(&self) -> usize {
        self.basis.len()
    }

    fn matrix(&self, p: &[f64]) -> DMatrix<f64> {
        let s = self.size;
        DMatrix::from_fn(s, s, |i, j| match self.param[i * s + j] {
            Some(k) => p[k],
            None if i == 0 && j == 0 => 1.0,
            None => 0.0,
        })
    }

    /// `−t·obj − log det M − Σ log s`, or `None` outside the interior.
    fn value(&self, p: &[f64], t: f64) -> Option<f64> {
        let chol = self.matrix(p).cholesky()?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mut total = -t * self.objective.eval(p) - logdet;
        for s in &self.slacks {
            let v = s.eval(p);
            if v <= 0.0 {
                return None;
            }
            total -= v.ln();
        }
        total.is_finite().then_some(total)
    }

    /// Gradient, Hessian, `W = M⁻¹` and slack values at an interior point.
    fn derivatives(&self, p: &[f64], t: f64) -> Option<(DVector<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
        let np = self.num_params();
        let w = self.matrix(p).cholesky()?.inverse();
        let sv: Vec<f64> = self.slacks.iter().map(|s| s.eval(p)).collect();
        let mut grad = DVector::zeros(np);
        for &(k, c) in &self.objective.terms {
            grad[k] -= t * c;
        }
        for (k, entries) in self.basis.iter().enumerate() {
            grad[k] -= entries.iter().map(|&(a, b)| w[(a, b)]).sum::<f64>();
        }
        let mut hess = DMatrix::zeros(np, np);
        for k in 0..np {
            for q in k..np {
                let mut h = 0.0;
                for &(a, b) in &self.basis[k] {
                    for &(c, e) in &self.basis[q] {
                        h += w[(b, c)] * w[(e, a)];
                    }
                }
                hess[(k, q)] = h;
                hess[(q, k)] = h;
            }
        }
        for (s, &v) in self.slacks.iter().zip(&sv) {
            for &(k, c) in &s.terms {
                grad[k] -= c / v;
                for &(q, e) in &s.terms {
                    hess[(k, q)] += c * e / (v * v);
                }
            }
        }
        Some((grad, hess, w, sv))
    }

    /// Weak-duality bound from `Z = W/t`, `λ = 1/(t·s)`, maximizing the leftover
    /// linear term over the box `[0, 1]`.
    fn dual_bound(&self, w: &DMatrix<f64>, sv: &[f64], t: f64) -> f64 {
        let mut rho = vec![0.0; self.num_params()];
        for &(k, c) in &self.objective.terms {
            rho[k] += c;
        }
        for (k, entries) in self.basis.iter().enumerate() {
            rho[k] += entries.iter().map(|&(a, b)| w[(a, b)]).sum::<f64>() / t;
        }
        let mut bound = self.objective.constant + w[(0, 0)] / t;
        for (s, &v) in self.slacks.iter().zip(sv) {
            let lambda = 1.0 / (t * v);
            bound += lambda * s.constant;
            for &(k, c) in &s.terms {
                rho[k] += lambda * c;
            }
        }
        bound + rho.iter().map(|&v| v.max(0.0)).sum::<f64>()
    }

    fn solve(&self, delta: f64, max_newton: usize) -> Option<BarrierOutcome> {
        let df = self.d as f64;
        let mut p: Vec<f64> = self
            .basis
            .iter()
            .map(|e| if e.len() == 3 { 1.0 / df } else { 1.0 / (df * df) })
            .collect();
        let nu = (self.size + self.slacks.len()) as f64;
        let mut t = 1.0;
        let mut steps = 0;
        let mut best_ub = f64::INFINITY;
        loop {
            // centering
            let (w, sv) = loop {
                let (grad, mut hess, w, sv) = self.derivatives(&p, t)?;
                let chol = match hess.clone().cholesky() {
                    Some(c) => c,
                    None => {
                        let reg = 1e-12 * hess.trace().max(1.0);
                        for i in 0..hess.nrows() {
                            hess[(i, i)] += reg;
                        }
                        hess.cholesky()?
                    }
                };
                let step = -chol.solve(&grad);
                let decrement = -grad.dot(&step);
                if decrement <= 1e-10 || steps >= max_newton {
                    break (w, sv);
                }
                steps += 1;
                let f0 = self.value(&p, t)?;
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + alpha * b).collect();
                    if let Some(f) = self.value(&trial, t) {
                        if f <= f0 - 0.25 * alpha * decrement {
                            p = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    break (w, sv);
                }
            };
            best_ub = best_ub.min(self.dual_bound(&w, &sv, t));
            let lb = self.objective.eval(&p);
            if best_ub - lb <= 0.5 * delta || steps >= max_newton || nu / t < 1e-14 {
                return Some(BarrierOutcome {
                    m: self.matrix(&p),
                    upper_bound: best_ub,
                    newton_steps: steps,
                });
            }
            t *= 8.0;
        }
    }
}
