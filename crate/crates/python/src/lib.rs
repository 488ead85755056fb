//! Python bindings: constellations, composite alphabets, detectors, mutual
//! information, CPAC optimization, the CPAC table, beamforming and the
//! experiment drivers.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use smust::constellation::LegacyConstellation;
use smust::mimo;
use smust::power_alloc::{self, GridSpec, LutGrid};
use smust::receiver::{self, FoldedNoise, MpicParams, SicOrder};
use smust::sim::{self, Experiment, SimConfig};
use smust::superposition::{self, Category, CompositeConstellation, CpacSet, PrimeCpacSet, QUANTIZE_BUDGET};

create_exception!(pysmust, SmustError, PyException);

fn err(e: smust::Error) -> PyErr {
    SmustError::new_err(format!("{}: {e}", e.kind()))
}

fn modulation(name: &str) -> PyResult<LegacyConstellation> {
    LegacyConstellation::from_name(name).map_err(err)
}

/// A Gray-labelled legacy QAM constellation.
#[pyclass(name = "Constellation", frozen)]
struct PyConstellation {
    inner: LegacyConstellation,
}

#[pymethods]
impl PyConstellation {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(PyConstellation { inner: modulation(name)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    #[getter]
    fn bits_per_symbol(&self) -> u32 {
        self.inner.bits_per_symbol()
    }

    /// Integer PAM amplitudes `(I, Q)` of a word.
    fn map(&self, word: u32) -> PyResult<(i64, i64)> {
        if (word as usize) >= self.inner.order() {
            return Err(SmustError::new_err(format!("word {word} out of range")));
        }
        Ok(self.inner.map_index(word))
    }
}

/// A superimposed multiuser alphabet.
#[pyclass(name = "Composite", frozen)]
struct PyComposite {
    inner: CompositeConstellation,
}

fn users(modulation_name: &str, count: usize) -> PyResult<Vec<LegacyConstellation>> {
    Ok(vec![modulation(modulation_name)?; count])
}

#[pymethods]
impl PyComposite {
    #[staticmethod]
    #[pyo3(signature = (alpha, beta, power, modulation = "qpsk"))]
    fn cat1(alpha: Vec<f64>, beta: Vec<f64>, power: f64, modulation: &str) -> PyResult<Self> {
        let u = users(modulation, alpha.len())?;
        let cpacs = CpacSet::new(alpha, beta, power).map_err(err)?;
        Ok(PyComposite { inner: CompositeConstellation::cat1(&cpacs, &u).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, beta, power, modulation = "qpsk"))]
    fn cat2(alpha: Vec<f64>, beta: Vec<f64>, power: f64, modulation: &str) -> PyResult<Self> {
        let u = users(modulation, alpha.len())?;
        let cpacs = CpacSet::new(alpha, beta, power).map_err(err)?;
        Ok(PyComposite { inner: CompositeConstellation::cat2(&cpacs, &u).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (q, p, power, modulation = "qpsk"))]
    fn cat3(q: Vec<u64>, p: Vec<u64>, power: f64, modulation: &str) -> PyResult<Self> {
        let u = users(modulation, q.len())?;
        let primes = PrimeCpacSet::new(q, p).map_err(err)?;
        Ok(PyComposite { inner: CompositeConstellation::cat3(&primes, &u, power).map_err(err)? })
    }

    /// Conventional MUST (`category` 1, 2 or 3) for two users.
    #[staticmethod]
    #[pyo3(signature = (category, near_fraction, far, power, modulation = "qpsk"))]
    fn must(category: u8, near_fraction: f64, far: usize, power: f64, modulation: &str) -> PyResult<Self> {
        let cat = match category {
            1 => Category::MustCat1,
            2 => Category::MustCat2,
            3 => Category::MustCat3,
            c => return Err(SmustError::new_err(format!("MUST category {c} does not exist"))),
        };
        let u = users(modulation, 2)?;
        Ok(PyComposite { inner: CompositeConstellation::must(cat, near_fraction, &u, far, power).map_err(err)? })
    }

    #[getter]
    fn category(&self) -> &'static str {
        self.inner.category().name()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    #[getter]
    fn mean_power(&self) -> f64 {
        self.inner.mean_power()
    }

    fn is_injective(&self) -> bool {
        self.inner.is_injective()
    }

    /// Distinct unscaled in-phase amplitudes.
    fn i_levels(&self) -> Vec<f64> {
        self.inner.axis(superposition::Axis::I).distinct_values()
    }

    /// Transmitted (scaled) point for one word per user.
    fn encode(&self, words: Vec<u32>) -> PyResult<Complex64> {
        self.inner.encode_words(&words).map_err(err)
    }

    /// `(point, words)` for every tuple.
    fn points(&self) -> Vec<(Complex64, Vec<u32>)> {
        self.inner.points().into_iter().map(|p| (p.value, p.words)).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// SIC decisions, layers peeled by amplitude (ties: weaker `gains` first).
    #[pyo3(signature = (y, gains = None))]
    fn sic_detect(&self, y: Complex64, gains: Option<Vec<f64>>) -> PyResult<Vec<u32>> {
        let order = SicOrder::by_layer_amplitude(&self.inner, gains.as_deref());
        receiver::sic_detect(y, &self.inner, &order).map_err(err)
    }

    fn ml_detect(&self, y: Complex64) -> Vec<u32> {
        receiver::ml_oracle(y, &self.inner)
    }

    /// M-PIC for `user`: `(word, (i, q), llrs)`.
    #[pyo3(signature = (y, user, noise_var, wrapped = false))]
    fn mpic_detect(&self, y: Complex64, user: usize, noise_var: f64, wrapped: bool) -> PyResult<(u32, (i64, i64), Vec<f64>)> {
        let params = MpicParams::from_alphabet(&self.inner, user).map_err(err)?;
        let folded = if wrapped { FoldedNoise::Wrapped } else { FoldedNoise::HighSnr };
        let out = receiver::mpic_detect(y, &params, noise_var, folded).map_err(err)?;
        Ok((out.word, out.symbol, out.llr))
    }

    /// Conditional mutual information of `user` (bits), deterministic quadrature.
    fn mutual_information(&self, user: usize, snr: Vec<f64>) -> PyResult<f64> {
        let decoder = power_alloc::default_decoder(&self.inner, &snr);
        power_alloc::mi_conditional_quadrature(&self.inner, user, &snr, &decoder).map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (modulation, snr))]
fn mi_single(modulation: &str, snr: f64) -> PyResult<f64> {
    power_alloc::mi_single_quadrature(&self::modulation(modulation)?, snr).map_err(err)
}

/// Max-min CPAC search; returns a dict with alpha, beta, objective, per_user.
#[pyfunction]
#[pyo3(signature = (snr, modulation = "qpsk", power = 1.0))]
fn optimize_cpacs<'py>(py: Python<'py>, snr: Vec<f64>, modulation: &str, power: f64) -> PyResult<Bound<'py, PyDict>> {
    let u = users(modulation, snr.len())?;
    let opt = power_alloc::optimize_cpacs(&snr, &u, power, &GridSpec::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("alpha", opt.cpacs.alpha().to_vec())?;
    d.set_item("beta", opt.cpacs.beta().to_vec())?;
    d.set_item("objective", opt.objective)?;
    d.set_item("per_user", opt.per_user)?;
    Ok(d)
}

/// Pairwise-coprime moduli `(q, p)` for real CPACs.
#[pyfunction]
#[pyo3(signature = (alpha, beta, power, modulation = "qpsk"))]
fn quantize_cpacs(alpha: Vec<f64>, beta: Vec<f64>, power: f64, modulation: &str) -> PyResult<(Vec<u64>, Vec<u64>)> {
    let u = users(modulation, alpha.len())?;
    let cpacs = CpacSet::new(alpha, beta, power).map_err(err)?;
    let primes = superposition::quantize_cpacs(&cpacs, &u, QUANTIZE_BUDGET).map_err(err)?;
    Ok((primes.q().to_vec(), primes.p().to_vec()))
}

fn vectors(channels: Vec<Vec<Complex64>>) -> Vec<nalgebra::DVector<Complex64>> {
    channels.into_iter().map(nalgebra::DVector::from_vec).collect()
}

/// Zero-forcing beams towards the given head channels: `(beams, gamma)`.
#[pyfunction]
fn zf_beams(heads: Vec<Vec<Complex64>>) -> PyResult<(Vec<Vec<Complex64>>, f64)> {
    let h = vectors(heads);
    let refs: Vec<_> = h.iter().collect();
    let beams = mimo::zf_beams(&refs).map_err(err)?;
    Ok((beams.w.iter().map(|w| w.iter().copied().collect()).collect(), beams.gamma))
}

/// User clusters (head first) for `clusters` clusters of up to `members`.
#[pyfunction]
fn cluster_users(channels: Vec<Vec<Complex64>>, clusters: usize, members: usize) -> PyResult<Vec<Vec<usize>>> {
    let (plan, _) = mimo::plan_clusters(&vectors(channels), clusters, members).map_err(err)?;
    Ok(plan.clusters)
}

/// `(alpha, beta, q, p)` of one table entry.
type Entry = (Vec<f64>, Vec<f64>, Vec<u64>, Vec<u64>);

/// SNR-indexed CPAC table.
#[pyclass(name = "Lut", frozen)]
struct PyLut {
    inner: LutGrid,
}

#[pymethods]
impl PyLut {
    /// Two-user table over `start..=stop` dB on both axes.
    #[staticmethod]
    #[pyo3(signature = (start_db, stop_db, step_db, modulation = "qpsk", power = 1.0))]
    fn build(start_db: f64, stop_db: f64, step_db: f64, modulation: &str, power: f64) -> PyResult<Self> {
        let axis = power_alloc::snr_axis(start_db, stop_db, step_db).map_err(err)?;
        let u = users(modulation, 2)?;
        let inner = power_alloc::build_lut(vec![axis.clone(), axis], &u, power, &GridSpec::default()).map_err(err)?;
        Ok(PyLut { inner })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyLut { inner: LutGrid::load(&path).map_err(err)? })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Nearest cell: `(alpha, beta, q, p)`.
    fn lookup(&self, snr_db: Vec<f64>) -> PyResult<Entry> {
        let (c, p) = self.inner.lookup(&snr_db).map_err(err)?;
        Ok((c.alpha().to_vec(), c.beta().to_vec(), p.q().to_vec(), p.p().to_vec()))
    }
}

fn records_to_py<'py>(py: Python<'py>, records: &[sim::ResultRecord]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scheme", &r.scheme)?;
            d.set_item(&r.axis, r.x)?;
            d.set_item(&r.metric, r.value)?;
            d.set_item("std_error", r.std_error)?;
            d.set_item("trials", r.trials)?;
            d.set_item("seed", r.seed)?;
            Ok(d)
        })
        .collect()
}

/// Runs the experiment described by a TOML document and returns its records.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = SimConfig::from_toml(config_toml).map_err(err)?;
    let records = py
        .detach(|| -> smust::Result<Vec<sim::ResultRecord>> {
            match cfg.experiment {
                Experiment::Fairness => sim::run_fairness_sweep(&cfg),
                Experiment::Mimo => sim::run_mimo_cdf(&cfg, &sim::build_config_lut(&cfg)?),
                Experiment::Sched => Ok(sim::run_sched(&cfg, &sim::build_config_lut(&cfg)?)?.records),
                Experiment::Lut => Err(smust::Error::InvalidConfig("table builds produce no records".into())),
            }
        })
        .map_err(err)?;
    records_to_py(py, &records)
}

#[pymodule]
fn pysmust(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SmustError", m.py().get_type::<SmustError>())?;
    m.add_class::<PyConstellation>()?;
    m.add_class::<PyComposite>()?;
    m.add_class::<PyLut>()?;
    m.add_function(wrap_pyfunction!(mi_single, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_cpacs, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_cpacs, m)?)?;
    m.add_function(wrap_pyfunction!(zf_beams, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_users, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
