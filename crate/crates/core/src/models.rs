//! Built-in scenarios: a spin measurement, two devices in series, and a
//! double slit with a detector array.
//!
//! Every model carries its dynamics, named projectors on the full Hilbert
//! space and the families used to reason about it. Family generators are
//! named `<symbol>@<time>`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::histories::{
    FamilySettings, History, HistoryError, HistoryFamily, HistoryFormula, HistoryLeaf,
    PropagatorSet, TimeGrid,
};
use crate::linalg::{
    basis_vector, complete_unitary, embed_operator, tensor_vectors, ComplexMatrix, LinalgError,
    Tolerance, C64,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` out of range: {reason}")]
    ParameterOutOfRange { name: &'static str, reason: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A fully specified model with its named projectors and families.
#[derive(Debug, Clone)]
pub struct NamedModel {
    pub name: &'static str,
    /// Dimensions of the tensor factors of the single-time space.
    pub factor_dims: Vec<usize>,
    pub propagators: Arc<PropagatorSet>,
    /// Projectors on the full single-time space.
    pub symbols: IndexMap<String, ComplexMatrix>,
    /// Unitaries used to build the dynamics, by name.
    pub operators: IndexMap<String, ComplexMatrix>,
    pub families: IndexMap<String, HistoryFamily>,
}

impl NamedModel {
    pub fn dim(&self) -> usize {
        self.propagators.dim()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.propagators.grid()
    }

    pub fn symbol(&self, name: &str) -> Result<&ComplexMatrix, ModelError> {
        self.symbols
            .get(name)
            .ok_or_else(|| ModelError::UnknownSymbol(name.to_owned()))
    }

    pub fn family(&self, name: &str) -> Result<&HistoryFamily, ModelError> {
        self.families
            .get(name)
            .ok_or_else(|| ModelError::UnknownSymbol(name.to_owned()))
    }

    /// The simple history with the given symbols at the given time labels
    /// and I elsewhere.
    pub fn history(&self, events: &[(&str, &str)]) -> Result<History, ModelError> {
        let grid = self.grid();
        let events = events
            .iter()
            .map(|(sym, t)| Ok((grid.index_of_label(t)?, self.symbol(sym)?.clone())))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(History::from_events(self.dim(), grid.len(), &events)?)
    }

    /// Statement formula for one such history.
    pub fn event(&self, events: &[(&str, &str)]) -> Result<HistoryFormula, ModelError> {
        Ok(HistoryFormula::leaf(HistoryLeaf::History(
            self.history(events)?,
        )))
    }

    fn add_family(
        &mut self,
        name: &str,
        generators: &[(&str, &str)],
        settings: FamilySettings,
    ) -> Result<(), ModelError> {
        let mut gens = IndexMap::new();
        for (sym, t) in generators {
            gens.insert(format!("{sym}@{t}"), self.history(&[(sym, t)])?);
        }
        let family = HistoryFamily::build(self.propagators.clone(), gens, settings)?;
        self.families.insert(name.to_owned(), family);
        Ok(())
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn combine(terms: &[(C64, &[C64])]) -> Vec<C64> {
    let dim = terms[0].1.len();
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for (z, v) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += z * x;
        }
    }
    out
}

fn ket(v: &[C64]) -> Result<ComplexMatrix, ModelError> {
    Ok(ComplexMatrix::outer(v, v)?)
}

/// Spin basis used by every model: index 0 is Sx = +1/2, index 1 is
/// Sx = −1/2.
fn spin_states() -> (Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>) {
    let alpha = basis_vector(2, 0);
    let beta = basis_vector(2, 1);
    let gamma = combine(&[(c(FRAC_1_SQRT_2), &alpha), (c(FRAC_1_SQRT_2), &beta)]);
    let delta = combine(&[(c(FRAC_1_SQRT_2), &alpha), (c(-FRAC_1_SQRT_2), &beta)]);
    (alpha, beta, gamma, delta)
}

/// How the measurement unitary acts outside the ready sector of the
/// apparatus, where the physics leaves it free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpinCompletion {
    /// A permutation of basis states in which every preimage of a pointer
    /// reading X± carries the matching spin.
    #[default]
    Permutation,
    /// A non-permutation unitary with the same recording property.
    Mixing,
    /// Gram–Schmidt over the standard basis. The pointer then no longer
    /// records the spin for apparatus states that were not ready, so
    /// retrodiction without conditioning on readiness becomes 1/2.
    GramSchmidt,
}

/// Spin ⊗ apparatus(ready, X+, X−) measuring Sx, on times t1, t1.5, t2.
pub fn build_spin_measurement_model(completion: SpinCompletion) -> Result<NamedModel, ModelError> {
    let tol = Tolerance::default();
    let (alpha, beta, gamma, delta) = spin_states();
    let [ready, plus, minus] = [0, 1, 2].map(|k| basis_vector(3, k));
    let k = |s: &[C64], a: &[C64]| tensor_vectors(s, a);

    let mut ins = vec![k(&alpha, &ready), k(&beta, &ready)];
    let mut outs = vec![k(&alpha, &plus), k(&beta, &minus)];
    match completion {
        SpinCompletion::Permutation => {
            ins.extend([
                k(&alpha, &plus),
                k(&beta, &plus),
                k(&alpha, &minus),
                k(&beta, &minus),
            ]);
            outs.extend([
                k(&beta, &plus),
                k(&alpha, &minus),
                k(&alpha, &ready),
                k(&beta, &ready),
            ]);
        }
        SpinCompletion::Mixing => {
            let (th, ph) = (0.7f64, 0.4f64);
            let (cs, sn) = (c(th.cos()), th.sin());
            let e = C64::from_polar(sn, ph);
            let em = -C64::from_polar(sn, -ph);
            ins.extend([
                k(&alpha, &plus),
                k(&alpha, &minus),
                k(&beta, &plus),
                k(&beta, &minus),
            ]);
            outs.extend([
                combine(&[(cs, &k(&beta, &plus)), (e, &k(&alpha, &ready))]),
                combine(&[(em, &k(&beta, &plus)), (cs, &k(&alpha, &ready))]),
                combine(&[(cs, &k(&alpha, &minus)), (e, &k(&beta, &ready))]),
                combine(&[(em, &k(&alpha, &minus)), (cs, &k(&beta, &ready))]),
            ]);
        }
        SpinCompletion::GramSchmidt => {}
    }
    let u = complete_unitary(&ins, &outs, tol)?;

    let grid = TimeGrid::labeled([("t1", 0.0), ("t1.5", 0.5), ("t2", 1.0)])?;
    let props = PropagatorSet::explicit(6, grid, vec![ComplexMatrix::identity(6), u.clone()], tol)?;

    let on_spin = |v: &[C64]| -> Result<ComplexMatrix, ModelError> {
        Ok(ket(v)?.tensor(&ComplexMatrix::identity(3))?)
    };
    let on_app = |v: &[C64]| -> Result<ComplexMatrix, ModelError> {
        Ok(ComplexMatrix::identity(2).tensor(&ket(v)?)?)
    };
    let g = combine(&[
        (c(FRAC_1_SQRT_2), &k(&alpha, &plus)),
        (c(FRAC_1_SQRT_2), &k(&beta, &minus)),
    ]);

    let mut symbols = IndexMap::new();
    symbols.insert("alpha".to_owned(), on_spin(&alpha)?);
    symbols.insert("beta".to_owned(), on_spin(&beta)?);
    symbols.insert("gamma".to_owned(), on_spin(&gamma)?);
    symbols.insert("delta".to_owned(), on_spin(&delta)?);
    symbols.insert("X".to_owned(), on_app(&ready)?);
    symbols.insert("X+".to_owned(), on_app(&plus)?);
    symbols.insert("X-".to_owned(), on_app(&minus)?);
    symbols.insert("G".to_owned(), ket(&g)?);

    let mut model = NamedModel {
        name: "spin-measurement",
        factor_dims: vec![2, 3],
        propagators: Arc::new(props),
        symbols,
        operators: IndexMap::from([("U".to_owned(), u)]),
        families: IndexMap::new(),
    };
    let s = FamilySettings::default();
    let f1 = [
        ("alpha", "t1"),
        ("beta", "t1"),
        ("X", "t1"),
        ("X+", "t2"),
        ("X-", "t2"),
    ];
    let f2 = [
        ("gamma", "t1"),
        ("delta", "t1"),
        ("X", "t1"),
        ("X+", "t2"),
        ("X-", "t2"),
    ];
    let f3 = [("gamma", "t1"), ("delta", "t1"), ("X", "t1"), ("G", "t2")];
    let f4 = [
        ("gamma", "t1"),
        ("delta", "t1"),
        ("X", "t1"),
        ("alpha", "t1.5"),
        ("beta", "t1.5"),
        ("X+", "t2"),
        ("X-", "t2"),
    ];
    model.add_family("F1", &f1, s)?;
    model.add_family("F2", &f2, s)?;
    model.add_family("F3", &f3, s)?;
    model.add_family("F4", &f4, s)?;
    Ok(model)
}

/// Optional extra device between t2 and t2.5 of the two-device model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MiddleDevice {
    /// Identity dynamics between t2 and t2.5.
    #[default]
    None,
    /// A third apparatus Y(ready, Y+, Y−) measuring Sx without changing it.
    Sx,
}

/// Unitary on spin ⊗ apparatus sending |s_±, ready⟩ to |s_±, ±⟩.
fn measuring_unitary(
    up: &[C64],
    down: &[C64],
    tol: Tolerance,
) -> Result<ComplexMatrix, ModelError> {
    let [ready, plus, minus] = [0, 1, 2].map(|k| basis_vector(3, k));
    Ok(complete_unitary(
        &[tensor_vectors(up, &ready), tensor_vectors(down, &ready)],
        &[tensor_vectors(up, &plus), tensor_vectors(down, &minus)],
        tol,
    )?)
}

/// Spin ⊗ X-apparatus ⊗ Z-apparatus on times t1, t2, t2.5, t3: Sx is
/// measured between t1 and t2 and Sz between t2.5 and t3.
pub fn build_two_device_model(middle: MiddleDevice) -> Result<NamedModel, ModelError> {
    let tol = Tolerance::default();
    let (alpha, beta, gamma, delta) = spin_states();
    let [ready, plus, minus] = [0, 1, 2].map(|k| basis_vector(3, k));
    let factor_dims = match middle {
        MiddleDevice::None => vec![2, 3, 3],
        MiddleDevice::Sx => vec![2, 3, 3, 3],
    };
    let dim: usize = factor_dims.iter().product();
    let ux = measuring_unitary(&alpha, &beta, tol)?;
    let uz = measuring_unitary(&gamma, &delta, tol)?;
    let step1 = embed_operator(&ux, &factor_dims, &[0, 1])?;
    let step3 = embed_operator(&uz, &factor_dims, &[0, 2])?;
    let step2 = match middle {
        MiddleDevice::None => ComplexMatrix::identity(dim),
        MiddleDevice::Sx => embed_operator(&ux, &factor_dims, &[0, 3])?,
    };
    let grid = TimeGrid::labeled([("t1", 0.0), ("t2", 1.0), ("t2.5", 1.5), ("t3", 2.0)])?;
    let props = PropagatorSet::explicit(
        dim,
        grid,
        vec![step1.clone(), step2.clone(), step3.clone()],
        tol,
    )?;

    let embed = |op: ComplexMatrix, on: &[usize]| -> Result<ComplexMatrix, ModelError> {
        Ok(embed_operator(&op, &factor_dims, on)?)
    };
    let mut psi = tensor_vectors(&tensor_vectors(&gamma, &ready), &ready);
    if middle == MiddleDevice::Sx {
        psi = tensor_vectors(&psi, &ready);
    }
    let mut symbols = IndexMap::new();
    for (name, v) in [
        ("alpha", &alpha),
        ("beta", &beta),
        ("gamma", &gamma),
        ("delta", &delta),
    ] {
        symbols.insert(name.to_owned(), embed(ket(v)?, &[0])?);
    }
    for (name, v) in [("X", &ready), ("X+", &plus), ("X-", &minus)] {
        symbols.insert(name.to_owned(), embed(ket(v)?, &[1])?);
    }
    for (name, v) in [("Z", &ready), ("Z+", &plus), ("Z-", &minus)] {
        symbols.insert(name.to_owned(), embed(ket(v)?, &[2])?);
    }
    if middle == MiddleDevice::Sx {
        for (name, v) in [("Y", &ready), ("Y+", &plus), ("Y-", &minus)] {
            symbols.insert(name.to_owned(), embed(ket(v)?, &[3])?);
        }
    }
    for (x, xs) in [("+", &plus), ("-", &minus)] {
        for (z, zs) in [("+", &plus), ("-", &minus)] {
            let p = embed(ket(&tensor_vectors(xs, zs))?, &[1, 2])?;
            symbols.insert(format!("X{x}Z{z}"), p);
        }
    }
    symbols.insert("psi1".to_owned(), ket(&psi)?);

    let mut model = NamedModel {
        name: "two-device",
        factor_dims: factor_dims.clone(),
        propagators: Arc::new(props),
        symbols,
        operators: IndexMap::from([
            ("U1".to_owned(), step1),
            ("U2".to_owned(), step2),
            ("U3".to_owned(), step3),
        ]),
        families: IndexMap::new(),
    };
    let s = FamilySettings::default();
    let finals = [
        ("X+Z+", "t3"),
        ("X+Z-", "t3"),
        ("X-Z+", "t3"),
        ("X-Z-", "t3"),
    ];
    let with = |extra: &[(&'static str, &'static str)]| {
        let mut v = vec![("psi1", "t1")];
        v.extend_from_slice(extra);
        v.extend_from_slice(&finals);
        v
    };
    model.add_family("F1", &with(&[]), s)?;
    model.add_family("F2", &with(&[("alpha", "t2"), ("beta", "t2")]), s)?;
    model.add_family("F3", &with(&[("gamma", "t2"), ("delta", "t2")]), s)?;
    model.add_family(
        "F4",
        &with(&[
            ("gamma", "t2"),
            ("delta", "t2"),
            ("gamma", "t2.5"),
            ("delta", "t2.5"),
        ]),
        s,
    )?;
    Ok(model)
}

/// Parameters of the double-slit model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleSlitParams {
    pub num_detectors: usize,
    pub phase_a: f64,
    pub phase_b: f64,
    pub reflect_amp: f64,
}

impl Default for DoubleSlitParams {
    fn default() -> Self {
        Self {
            num_detectors: 4,
            phase_a: 0.0,
            phase_b: PI,
            reflect_amp: 1.0 / 3f64.sqrt(),
        }
    }
}

impl DoubleSlitParams {
    /// Slit amplitudes a = b and reflection amplitude c.
    pub fn amplitudes(&self) -> (f64, f64, f64) {
        let a = ((1.0 - self.reflect_amp * self.reflect_amp) / 2.0).sqrt();
        (a, a, self.reflect_amp)
    }

    /// Detector amplitudes u_j, v_j for waves from slits A and B.
    pub fn detector_waves(&self) -> (Vec<C64>, Vec<C64>) {
        let m = self.num_detectors;
        let norm = 1.0 / (m as f64).sqrt();
        let wave = |phase: f64| {
            (1..=m)
                .map(|j| C64::from_polar(norm, phase * j as f64))
                .collect()
        };
        (wave(self.phase_a), wave(self.phase_b))
    }
}

/// Particle register (source, R_A, R_B, reflected, absorbed) ⊗ detector
/// pointer (ready, fired_1 … fired_m) on times t1, t2, t3.
pub fn build_double_slit_model(params: DoubleSlitParams) -> Result<NamedModel, ModelError> {
    let tol = Tolerance::default();
    let m = params.num_detectors;
    if m < 2 {
        return Err(ModelError::ParameterOutOfRange {
            name: "num_detectors",
            reason: "need at least 2".into(),
        });
    }
    if !(0.0..1.0).contains(&params.reflect_amp) {
        return Err(ModelError::ParameterOutOfRange {
            name: "reflect_amp",
            reason: "need 0 <= c < 1".into(),
        });
    }
    if !params.phase_a.is_finite() || !params.phase_b.is_finite() {
        return Err(ModelError::ParameterOutOfRange {
            name: "phase",
            reason: "phases must be finite".into(),
        });
    }
    let (u, v) = params.detector_waves();
    let overlap: C64 = u.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
    if overlap.norm() > tol.eps {
        return Err(ModelError::ParameterOutOfRange {
            name: "phase",
            reason: format!(
                "detector waves from the two slits overlap by {:.3e}; no unitary maps both",
                overlap.norm()
            ),
        });
    }

    let particle = 5;
    let pointer = m + 1;
    let dim = particle * pointer;
    let [source, ra, rb, refl, absorbed] = [0, 1, 2, 3, 4].map(|k| basis_vector(particle, k));
    let ready = basis_vector(pointer, 0);
    let (a, b, cr) = params.amplitudes();
    let entering = combine(&[(c(a), &ra), (c(b), &rb), (c(cr), &refl)]);
    let v1 = complete_unitary(std::slice::from_ref(&source), &[entering], tol)?;
    let step1 = v1.tensor(&ComplexMatrix::identity(pointer))?;

    let fired = |w: &[C64]| -> Vec<C64> {
        let mut p = vec![C64::new(0.0, 0.0); pointer];
        p[1..].copy_from_slice(w);
        p
    };
    let step2 = complete_unitary(
        &[
            tensor_vectors(&ra, &ready),
            tensor_vectors(&rb, &ready),
            tensor_vectors(&refl, &ready),
        ],
        &[
            tensor_vectors(&absorbed, &fired(&u)),
            tensor_vectors(&absorbed, &fired(&v)),
            tensor_vectors(&refl, &ready),
        ],
        tol,
    )?;
    let grid = TimeGrid::labeled([("t1", 0.0), ("t2", 1.0), ("t3", 2.0)])?;
    let props = PropagatorSet::explicit(dim, grid, vec![step1.clone(), step2.clone()], tol)?;

    let on_particle = |s: &[C64]| -> Result<ComplexMatrix, ModelError> {
        Ok(ket(s)?.tensor(&ComplexMatrix::identity(pointer))?)
    };
    let mut symbols = IndexMap::new();
    symbols.insert("Psi1".to_owned(), ket(&tensor_vectors(&source, &ready))?);
    let pa = on_particle(&ra)?;
    let pb = on_particle(&rb)?;
    symbols.insert("P".to_owned(), &pa + &pb);
    symbols.insert("PA".to_owned(), pa);
    symbols.insert("PB".to_owned(), pb);
    symbols.insert("reflected".to_owned(), on_particle(&refl)?);
    for j in 1..=m {
        let d = ComplexMatrix::identity(particle).tensor(&ket(&basis_vector(pointer, j))?)?;
        symbols.insert(format!("Dstar{j}"), d);
    }

    let mut model = NamedModel {
        name: "double-slit",
        factor_dims: vec![particle, pointer],
        propagators: Arc::new(props),
        symbols,
        operators: IndexMap::from([("U1".to_owned(), step1), ("U2".to_owned(), step2)]),
        families: IndexMap::new(),
    };
    let names: Vec<String> = (1..=m).map(|j| format!("Dstar{j}")).collect();
    let detectors: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "t3")).collect();
    let s = FamilySettings::default();
    let mut f1 = vec![("Psi1", "t1")];
    f1.extend_from_slice(&detectors);
    let mut f2 = f1.clone();
    f2.insert(1, ("P", "t2"));
    let f3 = [("Psi1", "t1"), ("PA", "t2"), ("PB", "t2")];
    model.add_family("F1", &f1, s)?;
    model.add_family("F2", &f2, s)?;
    model.add_family("F3", &f3, s)?;
    Ok(model)
}

/// Builds a model by its command-line name with default parameters.
pub fn builtin_model(name: &str) -> Option<Result<NamedModel, ModelError>> {
    match name {
        "spin-measurement" => Some(build_spin_measurement_model(SpinCompletion::default())),
        "two-device" => Some(build_two_device_model(MiddleDevice::None)),
        "double-slit" => Some(build_double_slit_model(DoubleSlitParams::default())),
        _ => None,
    }
}
