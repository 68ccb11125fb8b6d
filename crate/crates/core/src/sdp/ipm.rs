use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{SdpSolution, SdpStatus, SolverSettings};
use crate::linalg::SymMatrix;
use crate::model::{LiftedRow, LiftedSdp};

/// `coef · u_left u_rightᵀ`, indices into the factor basis.
type Factor = (f64, usize, usize);

#[derive(Clone, Debug)]
enum Origin {
    /// `Z[n, n] = 1`.
    Unit,
    Single(usize),
    /// `A_pos = −A_neg`, merged into one equality row.
    Pair { pos: usize, neg: usize },
}

#[derive(Clone, Debug)]
struct Row {
    dense: Option<DMatrix<f64>>,
    factors: Vec<Factor>,
    /// Index into the slack vector for inequality rows.
    slack: Option<usize>,
    rhs: f64,
    scale: f64,
    origin: Origin,
}

/// Scaled standard-form data.
struct Structure {
    dim: usize,
    basis: DMatrix<f64>,
    rows: Vec<Row>,
    dense_rows: Vec<usize>,
    c: DMatrix<f64>,
    obj_scale: f64,
    num_slack: usize,
    num_lifted: usize,
}

const UNIT: usize = 0;

impl Structure {
    fn build(sdp: &LiftedSdp) -> Structure {
        let n = sdp.n();
        let dim = n + 1;
        let mut basis_cols: Vec<DVector<f64>> = vec![unit_vector(dim, n)];
        let mut rows = vec![Row {
            dense: None,
            factors: vec![(1.0, UNIT, UNIT)],
            slack: None,
            rhs: 1.0,
            scale: 1.0,
            origin: Origin::Unit,
        }];

        let constraints = sdp.constraints();
        let forms: Vec<_> = constraints.iter().map(|c| c.to_form(n)).collect();
        let norms: Vec<f64> = forms.iter().map(|f| f.norm().max(1e-300)).collect();

        // Quadratic rows that repeat an earlier one (up to positive scale) are
        // dropped; exactly negated pairs become equalities.
        let unit: Vec<Option<DMatrix<f64>>> = constraints
            .iter()
            .zip(&forms)
            .zip(&norms)
            .map(|((c, f), &nrm)| matches!(c.row, LiftedRow::Quadratic(_)).then(|| f.bordered().as_matrix() / nrm))
            .collect();
        let mut duplicate = vec![false; constraints.len()];
        for i in 0..constraints.len() {
            let Some(bi) = &unit[i] else { continue };
            duplicate[i] = (0..i).any(|j| !duplicate[j] && unit[j].as_ref().is_some_and(|bj| same(bi, bj, 1.0)));
        }
        let mut partner: Vec<Option<usize>> = vec![None; constraints.len()];
        for i in 0..constraints.len() {
            let Some(bi) = &unit[i] else { continue };
            if partner[i].is_some() || duplicate[i] {
                continue;
            }
            for j in (i + 1)..constraints.len() {
                if partner[j].is_some() || duplicate[j] {
                    continue;
                }
                let Some(bj) = &unit[j] else { continue };
                if same(bi, bj, -1.0) {
                    partner[i] = Some(j);
                    partner[j] = Some(i);
                    break;
                }
            }
        }

        let mut num_slack = 0;
        for (i, c) in constraints.iter().enumerate() {
            if duplicate[i] {
                continue;
            }
            let origin = match partner[i] {
                Some(j) if j < i => continue,
                Some(j) => Origin::Pair { pos: i, neg: j },
                None => Origin::Single(i),
            };
            let scale = norms[i];
            let (dense, factors) = match &c.row {
                LiftedRow::Quadratic(_) => (unit[i].clone(), Vec::new()),
                LiftedRow::Cut(cut) => {
                    let mut u = DVector::zeros(dim);
                    for (k, &a) in cut.a().iter().enumerate() {
                        u[k] = a as f64;
                    }
                    u[n] = -(cut.b() as f64);
                    basis_cols.push(u);
                    let k = basis_cols.len() - 1;
                    let mut f = vec![(-1.0 / scale, k, k), (0.5 / scale, k, UNIT), (0.5 / scale, UNIT, k)];
                    if c.shift != 0.0 {
                        f.push((-c.shift / scale, UNIT, UNIT));
                    }
                    (None, f)
                }
                LiftedRow::Linear(l) => {
                    let mut u = DVector::zeros(dim);
                    for (k, &a) in l.c.iter().enumerate() {
                        u[k] = a as f64;
                    }
                    u[n] = -(l.d as f64);
                    basis_cols.push(u);
                    let k = basis_cols.len() - 1;
                    let mut f = vec![(0.5 / scale, k, UNIT), (0.5 / scale, UNIT, k)];
                    if c.shift != 0.0 {
                        f.push((-c.shift / scale, UNIT, UNIT));
                    }
                    (None, f)
                }
            };
            let slack = if matches!(origin, Origin::Single(_)) {
                num_slack += 1;
                Some(num_slack - 1)
            } else {
                None
            };
            rows.push(Row { dense, factors, slack, rhs: 0.0, scale, origin });
        }

        let obj = sdp.objective();
        let norm = obj.norm();
        let obj_scale = if norm > 1e-8 { norm } else { 1.0 };
        let c = obj.bordered().as_matrix() / obj_scale;
        let basis = DMatrix::from_columns(&basis_cols);
        let dense_rows = (0..rows.len()).filter(|&k| rows[k].dense.is_some()).collect();
        Structure { dim, basis, rows, dense_rows, c, obj_scale, num_slack, num_lifted: constraints.len() }
    }

    /// `Tr(A_k G)` for every row (G symmetric).
    fn apply(&self, g: &DMatrix<f64>) -> DVector<f64> {
        let gu = g * &self.basis;
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                let mut v = match &row.dense {
                    Some(a) => a.dot(g),
                    None => 0.0,
                };
                for &(c, p, q) in &row.factors {
                    v += c * self.basis.column(p).dot(&gu.column(q));
                }
                v
            }),
        )
    }

    /// `Σ_k y_k A_k`.
    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (row, &yk) in self.rows.iter().zip(y.iter()) {
            if yk == 0.0 {
                continue;
            }
            if let Some(a) = &row.dense {
                out += a * yk;
            }
            for &(c, p, q) in &row.factors {
                out.ger(c * yk, &self.basis.column(p), &self.basis.column(q), 1.0);
            }
        }
        out
    }

    /// `M_kj = Tr(A_k Z A_j T)`.
    fn schur(&self, z: &DMatrix<f64>, t: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut out = DMatrix::zeros(m, m);

        let zu = z * &self.basis;
        let tu = t * &self.basis;
        let gz = self.basis.transpose() * &zu;
        let gt = self.basis.transpose() * &tu;
        for k in 0..m {
            let fk = &self.rows[k].factors;
            if fk.is_empty() {
                continue;
            }
            for j in k..m {
                let fj = &self.rows[j].factors;
                let mut v = 0.0;
                for &(c, p, q) in fk {
                    for &(c2, p2, q2) in fj {
                        v += c * c2 * gz[(q, p2)] * gt[(q2, p)];
                    }
                }
                out[(k, j)] += v;
            }
        }

        for &j in &self.dense_rows {
            let aj = self.rows[j].dense.as_ref().unwrap();
            let g = z * aj * t;
            let g = (&g + g.transpose()) * 0.5;
            let gu = &g * &self.basis;
            for k in 0..m {
                let row = &self.rows[k];
                let mut v = 0.0;
                if let Some(ak) = &row.dense {
                    if k > j {
                        continue;
                    }
                    v += ak.dot(&g);
                }
                for &(c, p, q) in &row.factors {
                    v += c * self.basis.column(p).dot(&gu.column(q));
                }
                // dense-dense pairs are visited once (k ≤ j); mixed pairs once
                if row.dense.is_some() || k <= j {
                    out[(k.min(j), k.max(j))] += v;
                } else {
                    out[(j, k)] += v;
                }
            }
        }

        for k in 0..m {
            for j in (k + 1)..m {
                out[(j, k)] = out[(k, j)];
            }
        }
        out
    }
}

fn unit_vector(dim: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(dim);
    v[k] = 1.0;
    v
}

/// `a ≈ sign·b` entrywise, for unit-norm rows.
fn same(a: &DMatrix<f64>, b: &DMatrix<f64>, sign: f64) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| (x - sign * y).abs() <= 1e-12)
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `α` with `X + α dX ⪰ 0`, given the Cholesky factor of `X ≻ 0`.
fn max_step_psd(chol: &Cholesky<f64, Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(a) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(b) = l.solve_lower_triangular(&a.transpose()) else { return 0.0 };
    let b = sym(b);
    let lmin = nalgebra::SymmetricEigen::new(b).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_vec(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dz: DMatrix<f64>,
    ds_mat: DMatrix<f64>,
    dy: DVector<f64>,
    dslack: DVector<f64>,
    dw: DVector<f64>,
}

struct Iterate {
    z: DMatrix<f64>,
    s_mat: DMatrix<f64>,
    y: DVector<f64>,
    slack: DVector<f64>,
    w: DVector<f64>,
}

struct Residuals {
    primal: DVector<f64>,
    dual: DMatrix<f64>,
    dual_w: DVector<f64>,
    pinf: f64,
    dinf: f64,
    pobj: f64,
    dobj: f64,
}

impl Structure {
    fn slack_rows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().enumerate().filter_map(|(k, r)| r.slack.map(|s| (k, s)))
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let az = self.apply(&it.z);
        let mut primal = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.rhs)) - az;
        for (k, s) in self.slack_rows() {
            primal[k] -= it.slack[s];
        }
        let dual = &self.c - self.adjoint(&it.y) - &it.s_mat;
        let mut dual_w = DVector::zeros(self.num_slack);
        for (k, s) in self.slack_rows() {
            dual_w[s] = -it.y[k] - it.w[s];
        }
        let pinf = primal.norm() / 2.0;
        let dinf = (dual.norm_squared() + dual_w.norm_squared()).sqrt() / (1.0 + self.c.norm());
        Residuals { primal, dual, dual_w, pinf, dinf, pobj: self.c.dot(&it.z), dobj: it.y[0] }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        res: &Residuals,
        t: &DMatrix<f64>,
        mchol: &Cholesky<f64, Dyn>,
        target: f64,
        corr: Option<(&DMatrix<f64>, &DVector<f64>)>,
    ) -> Direction {
        let mut inner = &it.z * &res.dual;
        if let Some((cm, _)) = corr {
            inner += cm;
        }
        let g = sym(t * target - &it.z - inner * t);
        let ag = self.apply(&g);
        let mut rhs = &res.primal - ag;
        let comp = |s: usize| -> f64 {
            let cv = corr.map_or(0.0, |(_, v)| v[s]);
            (target - it.slack[s] * it.w[s] - cv - it.slack[s] * res.dual_w[s]) / it.w[s]
        };
        for (k, s) in self.slack_rows() {
            rhs[k] -= comp(s);
        }
        let dy = mchol.solve(&rhs);
        let ds_mat = &res.dual - self.adjoint(&dy);
        let mut dw = DVector::zeros(self.num_slack);
        let mut dslack = DVector::zeros(self.num_slack);
        for (k, s) in self.slack_rows() {
            dw[s] = res.dual_w[s] - dy[k];
            let cv = corr.map_or(0.0, |(_, v)| v[s]);
            dslack[s] = (target - it.slack[s] * it.w[s] - cv - it.slack[s] * dw[s]) / it.w[s];
        }
        let mut inner = &it.z * &ds_mat;
        if let Some((cm, _)) = corr {
            inner += cm;
        }
        let dz = sym(t * target - &it.z - inner * t);
        Direction { dz, ds_mat, dy, dslack, dw }
    }
}

fn factor_schur(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let dim = m.nrows();
    let mut reg = 0.0;
    for _ in 0..8 {
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Some(ch);
        }
        let next = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for k in 0..dim {
            m[(k, k)] += next - reg;
        }
        reg = next;
    }
    None
}

struct Best {
    merit: f64,
    z: DMatrix<f64>,
    y: DVector<f64>,
    w: DVector<f64>,
    pinf: f64,
    dinf: f64,
    dobj: f64,
}

pub(super) fn solve(sdp: &LiftedSdp, settings: &SolverSettings) -> SdpSolution {
    let st = Structure::build(sdp);
    let dim = st.dim;
    let nu = (dim + st.num_slack) as f64;
    let mut it = Iterate {
        z: DMatrix::identity(dim, dim),
        s_mat: DMatrix::identity(dim, dim),
        y: DVector::zeros(st.rows.len()),
        slack: DVector::from_element(st.num_slack, 1.0),
        w: DVector::from_element(st.num_slack, 1.0),
    };
    let gamma = settings.step_fraction;
    let mut best: Option<Best> = None;
    let mut status = SdpStatus::MaxIters;
    let mut iterations = 0;
    let mut stalls = 0;

    loop {
        let res = st.residuals(&it);
        let mu = (it.z.dot(&it.s_mat) + it.slack.dot(&it.w)) / nu;
        let p_unscaled = res.pobj * st.obj_scale;
        let d_unscaled = res.dobj * st.obj_scale;
        let gap = (p_unscaled - d_unscaled).abs() / (1.0 + p_unscaled.abs());
        let merit = res.pinf.max(res.dinf).max(gap);
        if !merit.is_finite() {
            break;
        }
        if best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Best {
                merit,
                z: it.z.clone(),
                y: it.y.clone(),
                w: it.w.clone(),
                pinf: res.pinf,
                dinf: res.dinf,
                dobj: d_unscaled,
            });
        }
        if res.pinf <= settings.feas_tol && res.dinf <= settings.feas_tol && gap <= settings.rel_gap_tol {
            status = SdpStatus::Optimal;
            break;
        }
        if let Some(s) = detect_infeasibility(&st, &it, &res) {
            status = s;
            break;
        }
        if iterations >= settings.max_iters || stalls >= 5 {
            break;
        }
        iterations += 1;

        let Some(schol) = Cholesky::new(it.s_mat.clone()) else { break };
        let Some(zchol) = Cholesky::new(it.z.clone()) else { break };
        let t = schol.inverse();
        let mut m = st.schur(&it.z, &t);
        for (k, s) in st.slack_rows() {
            m[(k, k)] += it.slack[s] / it.w[s];
        }
        let Some(mchol) = factor_schur(m) else { break };

        // predictor
        let aff = st.direction(&it, &res, &t, &mchol, 0.0, None);
        let ap = max_step_psd(&zchol, &aff.dz).min(max_step_vec(&it.slack, &aff.dslack)).min(1.0);
        let ad = max_step_psd(&schol, &aff.ds_mat).min(max_step_vec(&it.w, &aff.dw)).min(1.0);
        let z_aff = &it.z + &aff.dz * ap;
        let s_aff = &it.s_mat + &aff.ds_mat * ad;
        let mu_aff = (z_aff.dot(&s_aff) + (&it.slack + &aff.dslack * ap).dot(&(&it.w + &aff.dw * ad))) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let corr_m = &aff.dz * &aff.ds_mat;
        let corr_v = aff.dslack.component_mul(&aff.dw);
        let dir = st.direction(&it, &res, &t, &mchol, sigma * mu, Some((&corr_m, &corr_v)));
        let ap = (gamma * max_step_psd(&zchol, &dir.dz).min(max_step_vec(&it.slack, &dir.dslack))).min(1.0);
        let ad = (gamma * max_step_psd(&schol, &dir.ds_mat).min(max_step_vec(&it.w, &dir.dw))).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) {
            break;
        }
        if ap < 1e-9 && ad < 1e-9 {
            stalls += 1;
        } else {
            stalls = 0;
        }

        it.z += &dir.dz * ap;
        it.z = sym(std::mem::take(&mut it.z));
        it.slack += &dir.dslack * ap;
        it.s_mat += &dir.ds_mat * ad;
        it.s_mat = sym(std::mem::take(&mut it.s_mat));
        it.y += &dir.dy * ad;
        it.w += &dir.dw * ad;
    }

    match status {
        SdpStatus::Optimal => {
            let res = st.residuals(&it);
            finish(sdp, &st, status, &it.z, &it.y, &it.w, iterations, res.pinf, res.dinf, it.y[0] * st.obj_scale)
        }
        SdpStatus::MaxIters => match best {
            Some(b) => finish(sdp, &st, status, &b.z, &b.y, &b.w, iterations, b.pinf, b.dinf, b.dobj),
            None => failed(sdp, &st, SdpStatus::MaxIters, iterations),
        },
        _ => failed(sdp, &st, status, iterations),
    }
}

/// Checks the iterate for an (approximate) infeasibility ray.
fn detect_infeasibility(st: &Structure, it: &Iterate, res: &Residuals) -> Option<SdpStatus> {
    // dual ray: y₀ → ∞ with S stays PSD
    let y0 = it.y[0];
    if y0 > 1e8 {
        let rel = (res.dual.norm() + res.dual_w.norm() + st.c.norm()) / y0;
        if rel < 1e-6 {
            return Some(SdpStatus::PrimalInfeasible);
        }
    }
    // primal ray: ‖Z‖ → ∞ along a direction of decrease
    let zn = it.z.norm();
    if zn > 1e8 && res.pobj / zn < -1e-8 && res.pinf / zn < 1e-6 {
        return Some(SdpStatus::UnboundedBelow);
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn finish(
    sdp: &LiftedSdp,
    st: &Structure,
    status: SdpStatus,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    iterations: usize,
    pinf: f64,
    dinf: f64,
    dual_objective: f64,
) -> SdpSolution {
    let n = sdp.n();
    let corner = z[(n, n)];
    let norm = if corner > 0.0 { corner } else { 1.0 };
    let mut big_x = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            big_x.set(i, j, z[(i, j)] / norm);
        }
    }
    let x: Vec<f64> = (0..n).map(|i| z[(i, n)] / norm).collect();
    let f_sdp = sdp.objective_value(&big_x, &x);

    let mut duals = vec![0.0; st.num_lifted];
    for (k, row) in st.rows.iter().enumerate() {
        let to_orig = st.obj_scale / row.scale;
        match row.origin {
            Origin::Unit => {}
            Origin::Single(i) => {
                duals[i] = (w[row.slack.unwrap()] * to_orig).max(0.0);
            }
            Origin::Pair { pos, neg } => {
                let nu = -y[k] * to_orig;
                if nu >= 0.0 {
                    duals[pos] = nu;
                } else {
                    duals[neg] = -nu;
                }
            }
        }
    }
    SdpSolution {
        status,
        big_x,
        x,
        f_sdp,
        duals,
        tags: sdp.constraints().iter().map(|c| c.tag).collect(),
        dual_objective,
        iterations,
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
    }
}

fn failed(sdp: &LiftedSdp, st: &Structure, status: SdpStatus, iterations: usize) -> SdpSolution {
    let n = sdp.n();
    let f_sdp = match status {
        SdpStatus::UnboundedBelow => f64::NEG_INFINITY,
        SdpStatus::PrimalInfeasible => f64::INFINITY,
        _ => f64::NAN,
    };
    SdpSolution {
        status,
        big_x: SymMatrix::zeros(n),
        x: vec![0.0; n],
        f_sdp,
        duals: vec![0.0; st.num_lifted],
        tags: sdp.constraints().iter().map(|c| c.tag).collect(),
        dual_objective: f_sdp,
        iterations,
        primal_infeasibility: f64::NAN,
        dual_infeasibility: f64::NAN,
    }
}
