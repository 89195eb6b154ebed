//! Coherent feedback composition: concatenation and series products on
//! (S, L, H) triples, static components, direct couplings, and closed-loop
//! assembly.
//!
//! A node stores its coupling as an affine form L = Λx + c over its own
//! quadrature coordinates and the Hamiltonian as (quadratic, linear) forms.
//! Series products may share oscillator modes (the loop closes over the same
//! physical system); concatenation requires disjoint modes. Coherent offsets
//! (laser amplitudes) stay affine and are folded into the constant drive of
//! the assembled system rather than enlarging the state.

use crate::algebra::{flat_adjoint, j_symplectic_real, quad_basis};
use crate::error::{Error, Result};
use crate::linalg::{
    imag_part, op_norm, op_norm_r, real_part, C64, CMat, CVec, RMat, RVec,
};
use crate::model::{to_quadrature, PhysicalParams, QuadratureSystem};

#[derive(Debug, Clone)]
pub struct SLHNode {
    pub label: String,
    /// Oscillator labels; the quadrature coordinates are (q_modes…, p_modes…).
    pub modes: Vec<String>,
    /// Scattering matrix, m×m.
    pub s: CMat,
    /// Linear coupling: L = Λx + offset, Λ is m×2n.
    pub lambda: CMat,
    pub offset: CVec,
    /// Hamiltonian quadratic form: H = ½ xᵀℍx + h_linᵀx (constants dropped).
    pub h_quad: RMat,
    pub h_lin: RVec,
    /// Input channel groups (sizes) in channel order; for a plant the groups
    /// are (free noise, signal+vacuum, loop input), for a controller
    /// (loop input, vacuum, signal+vacuum). Defaults to all signal+vacuum.
    pub input_partition: [usize; 3],
    /// Output channel groups (sizes) in channel order (free, measured,
    /// loop output). Defaults to all free.
    pub output_partition: [usize; 3],
}

impl SLHNode {
    pub fn new(
        label: impl Into<String>,
        modes: Vec<String>,
        s: CMat,
        lambda: CMat,
        offset: CVec,
        h_quad: RMat,
        h_lin: RVec,
    ) -> Result<Self> {
        let m = s.nrows();
        let n = modes.len();
        if s.ncols() != m {
            return Err(Error::Dimension("S must be square".into()));
        }
        if lambda.shape() != (m, 2 * n) || offset.len() != m {
            return Err(Error::Dimension("Λ must be m x 2n and offset length m".into()));
        }
        if h_quad.shape() != (2 * n, 2 * n) || h_lin.len() != 2 * n {
            return Err(Error::Dimension("ℍ must be 2n x 2n and h_lin length 2n".into()));
        }
        if op_norm_r(&(&h_quad - h_quad.transpose())) > 1e-10 {
            return Err(Error::Structure("ℍ must be symmetric".into()));
        }
        if op_norm(&(&s * s.adjoint() - CMat::identity(m, m))) > crate::algebra::DEFAULT_TOL {
            return Err(Error::Parameter("S must be unitary".into()));
        }
        let mut sorted = modes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != modes.len() {
            return Err(Error::Composition("duplicate mode labels within a node".into()));
        }
        Ok(Self {
            label: label.into(),
            modes,
            s,
            lambda,
            offset,
            h_quad,
            h_lin,
            input_partition: [0, m, 0],
            output_partition: [m, 0, 0],
        })
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    pub fn m(&self) -> usize {
        self.s.nrows()
    }

    /// Builds a node from the physical parameterization (K is not carried;
    /// classical drives enter through coherent offsets instead).
    pub fn from_physical(
        label: impl Into<String>,
        modes: Vec<String>,
        p: &PhysicalParams,
    ) -> Result<Self> {
        if modes.len() != p.n {
            return Err(Error::Dimension("mode labels must match oscillator count".into()));
        }
        let (lambda, h_quad) = if p.n == 0 {
            (CMat::zeros(p.m, 0), RMat::zeros(0, 0))
        } else {
            let v = quad_basis(p.n)?.matrix;
            let mut cpm = CMat::zeros(p.m, 2 * p.n);
            cpm.view_mut((0, 0), (p.m, p.n)).copy_from(&p.c_minus);
            cpm.view_mut((0, p.n), (p.m, p.n)).copy_from(&p.c_plus);
            let lambda = cpm * v.adjoint();
            let h_full = &v * p.omega() * v.adjoint();
            let imag = op_norm_r(&imag_part(&h_full));
            if imag > 1e-9 {
                return Err(Error::Structure(format!(
                    "Hamiltonian is not Hermitian doubled-up: residue {imag:.3e}"
                )));
            }
            (lambda, real_part(&h_full))
        };
        SLHNode::new(
            label,
            modes,
            p.s.clone(),
            lambda,
            CVec::zeros(p.m),
            h_quad,
            RVec::zeros(2 * p.n),
        )
    }

    /// Recovers (S, C₋, C₊, Ω₋, Ω₊) from the quadrature forms.
    pub fn to_physical(&self) -> Result<PhysicalParams> {
        let n = self.n();
        let m = self.m();
        if n == 0 {
            return PhysicalParams::new(
                self.s.clone(),
                CMat::zeros(m, 0),
                CMat::zeros(m, 0),
                CMat::zeros(0, 0),
                CMat::zeros(0, 0),
                CMat::zeros(0, 0),
            );
        }
        crate::gaussian::params_from_quadrature_forms(&self.h_quad, &self.lambda).map(|mut p| {
            p.s = self.s.clone();
            p
        })
    }

    /// Quadrature state-space model of the node alone.
    pub fn quadrature_system(&self) -> Result<QuadratureSystem> {
        let p = self.to_physical()?;
        to_quadrature(&crate::model::build_state_space(&p)?)
    }

    /// Constant drift contributed by the Hamiltonian linear form and the
    /// coherent offsets: ẋ += 𝕁(h_lin + Im(Λ†c)).
    pub fn constant_drive(&self) -> RVec {
        let n = self.n();
        if n == 0 {
            return RVec::zeros(0);
        }
        let cross = self.lambda.adjoint() * &self.offset;
        let imag = RVec::from_fn(2 * n, |i, _| cross[i].im);
        j_symplectic_real(n) * (&self.h_lin + imag)
    }

    fn check_partitions(&self) -> Result<()> {
        let m = self.m();
        if self.input_partition.iter().sum::<usize>() != m
            || self.output_partition.iter().sum::<usize>() != m
        {
            return Err(Error::Composition(format!(
                "partitions of node '{}' do not sum to {m} channels",
                self.label
            )));
        }
        Ok(())
    }
}

/// Mode-union bookkeeping: extends both nodes to a common coordinate space.
fn unify_modes(g1: &SLHNode, g2: &SLHNode) -> (Vec<String>, Vec<usize>, Vec<usize>) {
    let mut union: Vec<String> = g1.modes.clone();
    for m in &g2.modes {
        if !union.contains(m) {
            union.push(m.clone());
        }
    }
    let map = |node: &SLHNode| -> Vec<usize> {
        node.modes
            .iter()
            .map(|m| union.iter().position(|u| u == m).expect("mode in union"))
            .collect()
    };
    (union.clone(), map(g1), map(g2))
}

fn embed_lambda(lambda: &CMat, map: &[usize], n_union: usize) -> CMat {
    let m = lambda.nrows();
    let n = map.len();
    let mut out = CMat::zeros(m, 2 * n_union);
    for (local, &global) in map.iter().enumerate() {
        for row in 0..m {
            out[(row, global)] += lambda[(row, local)];
            out[(row, n_union + global)] += lambda[(row, n + local)];
        }
    }
    out
}

fn embed_quad(h: &RMat, map: &[usize], n_union: usize) -> RMat {
    let n = map.len();
    let mut out = RMat::zeros(2 * n_union, 2 * n_union);
    let glob = |local: usize| -> usize {
        if local < n {
            map[local]
        } else {
            n_union + map[local - n]
        }
    };
    for i in 0..2 * n {
        for j in 0..2 * n {
            out[(glob(i), glob(j))] += h[(i, j)];
        }
    }
    out
}

fn embed_lin(v: &RVec, map: &[usize], n_union: usize) -> RVec {
    let n = map.len();
    let mut out = RVec::zeros(2 * n_union);
    for (local, &global) in map.iter().enumerate() {
        out[global] += v[local];
        out[n_union + global] += v[n + local];
    }
    out
}

/// Concatenation product: S = diag(S₁, S₂), stacked couplings, H₁ + H₂.
/// The nodes must not share oscillator modes.
pub fn concatenation(g1: &SLHNode, g2: &SLHNode) -> Result<SLHNode> {
    if g1.modes.iter().any(|m| g2.modes.contains(m)) {
        return Err(Error::Composition(format!(
            "nodes '{}' and '{}' share oscillator modes",
            g1.label, g2.label
        )));
    }
    let (union, map1, map2) = unify_modes(g1, g2);
    let n_u = union.len();
    let (m1, m2) = (g1.m(), g2.m());
    let mut s = CMat::zeros(m1 + m2, m1 + m2);
    s.view_mut((0, 0), (m1, m1)).copy_from(&g1.s);
    s.view_mut((m1, m1), (m2, m2)).copy_from(&g2.s);
    let l1 = embed_lambda(&g1.lambda, &map1, n_u);
    let l2 = embed_lambda(&g2.lambda, &map2, n_u);
    let mut lambda = CMat::zeros(m1 + m2, 2 * n_u);
    lambda.view_mut((0, 0), (m1, 2 * n_u)).copy_from(&l1);
    lambda.view_mut((m1, 0), (m2, 2 * n_u)).copy_from(&l2);
    let mut offset = CVec::zeros(m1 + m2);
    offset.rows_mut(0, m1).copy_from(&g1.offset);
    offset.rows_mut(m1, m2).copy_from(&g2.offset);
    SLHNode::new(
        format!("({} + {})", g1.label, g2.label),
        union,
        s,
        lambda,
        offset,
        embed_quad(&g1.h_quad, &map1, n_u) + embed_quad(&g2.h_quad, &map2, n_u),
        embed_lin(&g1.h_lin, &map1, n_u) + embed_lin(&g2.h_lin, &map2, n_u),
    )
}

/// Series product g₂ ◁ g₁ (the output of g₁ feeds g₂): S = S₂S₁,
/// L = L₂ + S₂L₁, H = H₁ + H₂ + interaction, where the interaction
/// Hamiltonian is (1/2i)(L₂†S₂L₁ - L₁†S₂†L₂). The nodes may share modes.
pub fn series(g2: &SLHNode, g1: &SLHNode) -> Result<SLHNode> {
    if g1.m() != g2.m() {
        return Err(Error::Dimension(format!(
            "series: channel counts differ ({} vs {})",
            g2.m(),
            g1.m()
        )));
    }
    let (union, map1, map2) = unify_modes(g1, g2);
    let n_u = union.len();
    let l1 = embed_lambda(&g1.lambda, &map1, n_u);
    let l2 = embed_lambda(&g2.lambda, &map2, n_u);
    let h1 = embed_quad(&g1.h_quad, &map1, n_u);
    let h2 = embed_quad(&g2.h_quad, &map2, n_u);
    let lin1 = embed_lin(&g1.h_lin, &map1, n_u);
    let lin2 = embed_lin(&g2.h_lin, &map2, n_u);

    let s = &g2.s * &g1.s;
    let lambda = &l2 + &g2.s * &l1;
    let offset = &g2.offset + &g2.s * &g1.offset;

    // interaction quadratic form: 2 Re[(1/2i)(Λ₂†S₂Λ₁ - Λ₁†S₂†Λ₂)]
    let m_int =
        (l2.adjoint() * &g2.s * &l1 - l1.adjoint() * g2.s.adjoint() * &l2) * C64::new(0.0, -0.5);
    let h_int = real_part(&m_int) * 2.0;
    let h_int = (&h_int + h_int.transpose()) * 0.5;
    // interaction linear form: Im(Λ₂†S₂c₁) - Im(Λ₁†S₂†c₂)
    let v1 = l2.adjoint() * &g2.s * &g1.offset;
    let v2 = l1.adjoint() * g2.s.adjoint() * &g2.offset;
    let lin_int = RVec::from_fn(2 * n_u, |i, _| v1[i].im - v2[i].im);

    SLHNode::new(
        format!("({} << {})", g2.label, g1.label),
        union,
        s,
        lambda,
        offset,
        h1 + h2 + h_int,
        lin1 + lin2 + lin_int,
    )
}

/// A static (purely scattering) component, e.g. a beamsplitter or phase
/// shifter.
#[derive(Debug, Clone)]
pub struct StaticComponent {
    pub unitary: CMat,
}

impl StaticComponent {
    pub fn new(unitary: CMat) -> Result<Self> {
        let m = unitary.nrows();
        if unitary.ncols() != m {
            return Err(Error::Dimension("static component must be square".into()));
        }
        if op_norm(&(&unitary * unitary.adjoint() - CMat::identity(m, m)))
            > crate::algebra::DEFAULT_TOL
        {
            return Err(Error::Parameter("static component must be unitary".into()));
        }
        Ok(Self { unitary })
    }
}

/// Single-channel phase shifter e^{iφ}.
pub fn phase_shifter(phi: f64) -> StaticComponent {
    StaticComponent {
        unitary: CMat::from_element(1, 1, C64::new(phi.cos(), phi.sin())),
    }
}

/// Applies a static component after the node: series((U, 0, 0), node).
pub fn apply_static(component: &StaticComponent, node: &SLHNode) -> Result<SLHNode> {
    if component.unitary.nrows() != node.m() {
        return Err(Error::Dimension("static component channel count mismatch".into()));
    }
    SLHNode::new(
        format!("(U << {})", node.label),
        node.modes.clone(),
        &component.unitary * &node.s,
        &component.unitary * &node.lambda,
        &component.unitary * &node.offset,
        node.h_quad.clone(),
        node.h_lin.clone(),
    )
}

/// Direct-coupling blocks of the interaction Hamiltonian
/// ½(ă_p†Ξ†ă_k + ă_k†Ξă_p) with Ξ = Δ(iK₋, iK₊):
/// ℬ₁₂ = -Δ(K₋, K₊)^♭ and ℬ₂₁ = Δ(K₋, K₊).
pub fn direct_coupling(k_minus: &CMat, k_plus: &CMat) -> Result<(CMat, CMat)> {
    if k_minus.shape() != k_plus.shape() {
        return Err(Error::Dimension("K₋ and K₊ must share dimensions".into()));
    }
    let delta = crate::algebra::DoubledMatrix::new(k_minus.clone(), k_plus.clone())?.to_full();
    let b12 = -flat_adjoint(&delta)?;
    Ok((b12, delta))
}

/// Closed-loop quadrature assembly of a plant and a controller connected
/// through their designated channel groups, with optional direct coupling.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    pub a_cl: RMat,
    /// Input map of the w signals riding on the plant p₂ / controller k₃
    /// groups.
    pub b_cl: RMat,
    /// Constant-drive columns (plant, controller) from offsets and linear
    /// Hamiltonian terms.
    pub e_cl: RMat,
    /// Noise input map over the groups (p₁, p₂, k₂, k₃).
    pub g_cl: RMat,
    /// Performance output map (defaults to the plant block coordinates).
    pub c_cl: RMat,
    pub d_cl: RMat,
    /// Physical (non-loop) outputs: rows over (p_f, p_m, k_f, k_m).
    pub c_phys: RMat,
    /// Their noise feedthrough over (p₁, p₂, k₂, k₃).
    pub d_phys: RMat,
    pub n_plant: usize,
    pub n_controller: usize,
    /// Channel widths of the noise groups (p₁, p₂, k₂, k₃).
    pub noise_groups: [usize; 4],
}

fn quad_cols(mat: &RMat, m: usize, start: usize, size: usize) -> RMat {
    let rows = mat.nrows();
    let mut out = RMat::zeros(rows, 2 * size);
    for j in 0..size {
        out.set_column(j, &mat.column(start + j));
        out.set_column(size + j, &mat.column(m + start + j));
    }
    out
}

fn quad_rows(mat: &RMat, m: usize, start: usize, size: usize) -> RMat {
    let cols = mat.ncols();
    let mut out = RMat::zeros(2 * size, cols);
    for i in 0..size {
        out.set_row(i, &mat.row(start + i));
        out.set_row(size + i, &mat.row(m + start + i));
    }
    out
}

fn group_start(partition: &[usize; 3], group: usize) -> usize {
    partition[..group].iter().sum()
}

pub fn closed_loop(
    plant: &SLHNode,
    controller: &SLHNode,
    coupling: Option<(&CMat, &CMat)>,
) -> Result<ClosedLoopSystem> {
    plant.check_partitions()?;
    controller.check_partitions()?;
    let (n_p, n_k) = (plant.n(), controller.n());
    let (m_p, m_k) = (plant.m(), controller.m());
    // loop channels: the plant's last output group feeds the controller's
    // first input group, and the controller's last output group feeds the
    // plant's last input group.
    let m_pk = plant.output_partition[2];
    let m_k1 = controller.input_partition[0];
    let m_kp = controller.output_partition[2];
    let m_p3 = plant.input_partition[2];
    if m_pk != m_k1 || m_kp != m_p3 {
        return Err(Error::Composition(format!(
            "loop channel counts do not match: plant k-out {m_pk} vs controller in {m_k1}, \
             controller p-out {m_kp} vs plant in {m_p3}"
        )));
    }

    let qs_p = plant.quadrature_system()?;
    let qs_k = controller.quadrature_system()?;

    let in_p = plant.input_partition;
    let out_p = plant.output_partition;
    let in_k = controller.input_partition;
    let out_k = controller.output_partition;

    let b_p = |g: usize| quad_cols(&qs_p.b, m_p, group_start(&in_p, g), in_p[g]);
    let b_k = |g: usize| quad_cols(&qs_k.b, m_k, group_start(&in_k, g), in_k[g]);
    let c_p_rows = |g: usize| quad_rows(&qs_p.c, m_p, group_start(&out_p, g), out_p[g]);
    let c_k_rows = |g: usize| quad_rows(&qs_k.c, m_k, group_start(&out_k, g), out_k[g]);
    let d_p = |og: usize, ig: usize| {
        quad_cols(
            &quad_rows(&qs_p.d, m_p, group_start(&out_p, og), out_p[og]),
            m_p,
            group_start(&in_p, ig),
            in_p[ig],
        )
    };
    let d_k = |og: usize, ig: usize| {
        quad_cols(
            &quad_rows(&qs_k.d, m_k, group_start(&out_k, og), out_k[og]),
            m_k,
            group_start(&in_k, ig),
            in_k[ig],
        )
    };

    // causality: the controller's loop output must not see its loop input
    let d_kp1 = d_k(2, 0);
    if op_norm_r(&d_kp1) > 1e-10 {
        return Err(Error::Causality(
            "controller feeds its loop input directly back to the loop output (D_kp1 != 0)".into(),
        ));
    }

    // direct-coupling blocks in quadrature form
    let (b12, b21) = match coupling {
        Some((k_minus, k_plus)) => {
            if k_minus.shape() != (n_k, n_p) {
                return Err(Error::Dimension(format!(
                    "direct coupling must be {n_k} x {n_p}"
                )));
            }
            let (b12c, b21c) = direct_coupling(k_minus, k_plus)?;
            let vp = quad_basis(n_p.max(1))?.matrix;
            let vk = quad_basis(n_k.max(1))?.matrix;
            let q12 = &vp * b12c * vk.adjoint();
            let q21 = &vk * b21c * vp.adjoint();
            let imag = op_norm_r(&imag_part(&q12)).max(op_norm_r(&imag_part(&q21)));
            if imag > 1e-10 {
                return Err(Error::Structure(format!(
                    "direct coupling blocks are not doubled-up: residue {imag:.3e}"
                )));
            }
            (real_part(&q12), real_part(&q21))
        }
        None => (RMat::zeros(2 * n_p, 2 * n_k), RMat::zeros(2 * n_k, 2 * n_p)),
    };

    let (b_p1, b_p2, b_p3) = (b_p(0), b_p(1), b_p(2));
    let (b_k1, b_k2, b_k3) = (b_k(0), b_k(1), b_k(2));
    let c_pk = c_p_rows(2);
    let c_kp = c_k_rows(2);
    let d_pk1 = d_p(2, 0);
    let d_pk2 = d_p(2, 1);
    let d_pk3 = d_p(2, 2);
    let d_kp2 = d_k(2, 1);
    let d_kp3 = d_k(2, 2);

    let dim = 2 * (n_p + n_k);
    let mut a_cl = RMat::zeros(dim, dim);
    a_cl.view_mut((0, 0), (2 * n_p, 2 * n_p)).copy_from(&qs_p.a);
    a_cl.view_mut((0, 2 * n_p), (2 * n_p, 2 * n_k))
        .copy_from(&(&b_p3 * &c_kp + &b12));
    a_cl.view_mut((2 * n_p, 0), (2 * n_k, 2 * n_p))
        .copy_from(&(&b_k1 * &c_pk + &b21));
    a_cl.view_mut((2 * n_p, 2 * n_p), (2 * n_k, 2 * n_k))
        .copy_from(&(&qs_k.a + &b_k1 * &d_pk3 * &c_kp));

    let w_p_cols = 2 * in_p[1];
    let w_k_cols = 2 * in_k[2];
    let mut b_cl = RMat::zeros(dim, w_p_cols + w_k_cols);
    b_cl.view_mut((0, 0), (2 * n_p, w_p_cols)).copy_from(&b_p2);
    b_cl.view_mut((0, w_p_cols), (2 * n_p, w_k_cols))
        .copy_from(&(&b_p3 * &d_kp3));
    b_cl.view_mut((2 * n_p, 0), (2 * n_k, w_p_cols))
        .copy_from(&(&b_k1 * &d_pk2));
    b_cl.view_mut((2 * n_p, w_p_cols), (2 * n_k, w_k_cols))
        .copy_from(&(&b_k3 + &b_k1 * &d_pk3 * &d_kp3));

    let drive_p = plant.constant_drive();
    let drive_k = controller.constant_drive();
    let mut e_cl = RMat::zeros(dim, 2);
    for i in 0..2 * n_p {
        e_cl[(i, 0)] = drive_p[i];
    }
    for i in 0..2 * n_k {
        e_cl[(2 * n_p + i, 1)] = drive_k[i];
    }

    let cols_g = [2 * in_p[0], 2 * in_p[1], 2 * in_k[1], 2 * in_k[2]];
    let mut g_cl = RMat::zeros(dim, cols_g.iter().sum());
    {
        let blocks_top = [b_p1.clone(), b_p2.clone(), &b_p3 * &d_kp2, &b_p3 * &d_kp3];
        let blocks_bot = [
            &b_k1 * &d_pk1,
            &b_k1 * &d_pk2,
            &b_k2 + &b_k1 * &d_pk3 * &d_kp2,
            &b_k3 + &b_k1 * &d_pk3 * &d_kp3,
        ];
        let mut col = 0;
        for (i, width) in cols_g.iter().enumerate() {
            g_cl.view_mut((0, col), (2 * n_p, *width))
                .copy_from(&blocks_top[i]);
            g_cl.view_mut((2 * n_p, col), (2 * n_k, *width))
                .copy_from(&blocks_bot[i]);
            col += width;
        }
    }

    // default performance variables: the plant coordinates through its full
    // output map
    let mut c_cl = RMat::zeros(2 * m_p, dim);
    c_cl.view_mut((0, 0), (2 * m_p, 2 * n_p)).copy_from(&qs_p.c);
    let d_cl = RMat::zeros(2 * m_p, b_cl.ncols());

    // physical (non-loop) outputs: plant groups f, m then controller f, m
    let out_rows = 2 * (out_p[0] + out_p[1] + out_k[0] + out_k[1]);
    let mut c_phys = RMat::zeros(out_rows, dim);
    let mut d_phys = RMat::zeros(out_rows, g_cl.ncols());
    let mut row = 0;
    for g in 0..2 {
        let rows = 2 * out_p[g];
        if rows == 0 {
            continue;
        }
        let c_g = c_p_rows(g);
        let d_g1 = d_p(g, 0);
        let d_g2 = d_p(g, 1);
        let d_g3 = d_p(g, 2);
        c_phys.view_mut((row, 0), (rows, 2 * n_p)).copy_from(&c_g);
        c_phys
            .view_mut((row, 2 * n_p), (rows, 2 * n_k))
            .copy_from(&(&d_g3 * &c_kp));
        let blocks = [d_g1, d_g2, &d_g3 * &d_kp2, &d_g3 * &d_kp3];
        let mut col = 0;
        for (i, width) in cols_g.iter().enumerate() {
            d_phys
                .view_mut((row, col), (rows, *width))
                .copy_from(&blocks[i]);
            col += width;
        }
        row += rows;
    }
    for g in 0..2 {
        let rows = 2 * out_k[g];
        if rows == 0 {
            continue;
        }
        let c_g = c_k_rows(g);
        let d_g1 = d_k(g, 0);
        let d_g2 = d_k(g, 1);
        let d_g3 = d_k(g, 2);
        c_phys
            .view_mut((row, 0), (rows, 2 * n_p))
            .copy_from(&(&d_g1 * &c_pk));
        c_phys
            .view_mut((row, 2 * n_p), (rows, 2 * n_k))
            .copy_from(&(&c_g + &d_g1 * &d_pk3 * &c_kp));
        let blocks = [
            &d_g1 * &d_pk1,
            &d_g1 * &d_pk2,
            &d_g2 + &d_g1 * &d_pk3 * &d_kp2,
            &d_g3 + &d_g1 * &d_pk3 * &d_kp3,
        ];
        let mut col = 0;
        for (i, width) in cols_g.iter().enumerate() {
            d_phys
                .view_mut((row, col), (rows, *width))
                .copy_from(&blocks[i]);
            col += width;
        }
        row += rows;
    }

    Ok(ClosedLoopSystem {
        a_cl,
        b_cl,
        e_cl,
        g_cl,
        c_cl,
        d_cl,
        c_phys,
        d_phys,
        n_plant: n_p,
        n_controller: n_k,
        noise_groups: [in_p[0], in_p[1], in_k[1], in_k[2]],
    })
}

impl ClosedLoopSystem {
    /// Reassembles the closed loop as one open quantum system over the four
    /// vacuum noise groups and the non-loop outputs.
    pub fn as_quadrature_system(&self) -> Result<QuadratureSystem> {
        let (n_p, n_k) = (self.n_plant, self.n_controller);
        let n = n_p + n_k;
        let m: usize = self.noise_groups.iter().sum();
        if self.c_phys.nrows() != 2 * m {
            return Err(Error::Dimension(
                "physical outputs do not match the noise channel count".into(),
            ));
        }
        // state permutation: (q_p, p_p | q_k, p_k) → (q_p, q_k | p_p, p_k)
        let mut sperm = Vec::with_capacity(2 * n);
        sperm.extend(0..n_p);
        sperm.extend(2 * n_p..2 * n_p + n_k);
        sperm.extend(n_p..2 * n_p);
        sperm.extend(2 * n_p + n_k..2 * n);
        // channel permutation: per-group (q…, p…) pairs → global (q…, p…)
        let mut perm = Vec::with_capacity(2 * m);
        let mut start = 0;
        for &g in &self.noise_groups {
            for j in 0..g {
                perm.push(start + j);
            }
            start += 2 * g;
        }
        let mut start = 0;
        for &g in &self.noise_groups {
            for j in 0..g {
                perm.push(start + g + j);
            }
            start += 2 * g;
        }
        let a = RMat::from_fn(2 * n, 2 * n, |i, j| self.a_cl[(sperm[i], sperm[j])]);
        let b = RMat::from_fn(2 * n, 2 * m, |i, j| self.g_cl[(sperm[i], perm[j])]);
        let c = RMat::from_fn(2 * m, 2 * n, |i, j| self.c_phys[(perm[i], sperm[j])]);
        let d = RMat::from_fn(2 * m, 2 * m, |i, j| self.d_phys[(perm[i], perm[j])]);
        QuadratureSystem::new(n, m, 0, a, b, c, d, RMat::zeros(2 * n, 0))
    }
}
