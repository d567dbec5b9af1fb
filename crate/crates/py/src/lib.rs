//! Python bindings: tickets, verification, attacks, bounds and game values.

use std::sync::Mutex;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qtickets::attacks::{counterfeit, pair_outcome_distribution, CvAttacker, PairCloneStrategy};
use qtickets::bounds::{self, BoundReport};
use qtickets::cv::{self, CvAccount, CvLayout, CvVerifier, HolderSession, Pairing, QuestionPolicy};
use qtickets::games::{build_cv_pair_games, Game};
use qtickets::qticket::{self, QticketSecret, TokenInstance, VerifierPolicy};
use qtickets::quantum::{NoiseModel, QubitChannel, StateLabel};
use qtickets::sweep::{mixed_pair_distribution, sweep_double_accept, tolerance_grid, SweepConfig};
use qtickets::{RngStream, Tolerance};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn tolerance(s: &str) -> PyResult<Tolerance> {
    s.parse().map_err(value_err)
}

fn strategy(name: &str) -> PyResult<PairCloneStrategy> {
    PairCloneStrategy::by_name(name).map_err(value_err)
}

fn depolarizing(fidelity: f64, qubits: usize) -> PyResult<NoiseModel> {
    let ch = QubitChannel::depolarizing_with_fidelity(fidelity).map_err(value_err)?;
    Ok(NoiseModel::uniform(ch, qubits))
}

/// Issuer-side record of a qticket: serial and secret labels.
#[pyclass(name = "QticketSecret", frozen)]
struct PySecret {
    inner: QticketSecret,
}

#[pymethods]
impl PySecret {
    #[getter]
    fn serial(&self) -> String {
        self.inner.serial.to_string()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.iter().map(|l| l.to_string()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("QticketSecret(serial='{}', n={})", self.inner.serial, self.inner.len())
    }
}

/// Holder-side token. Verification consumes it.
#[pyclass(name = "Token", frozen)]
struct PyToken {
    inner: Mutex<Option<TokenInstance>>,
    serial: String,
    len: usize,
}

impl PyToken {
    fn wrap(t: TokenInstance) -> Self {
        Self { serial: t.serial().to_string(), len: t.len(), inner: Mutex::new(Some(t)) }
    }

    fn take(&self) -> PyResult<TokenInstance> {
        self.inner
            .lock()
            .map_err(|_| PyRuntimeError::new_err("token lock poisoned"))?
            .take()
            .ok_or_else(|| PyValueError::new_err("token was already consumed"))
    }
}

#[pymethods]
impl PyToken {
    #[getter]
    fn serial(&self) -> &str {
        &self.serial
    }

    #[getter]
    fn consumed(&self) -> bool {
        self.inner.lock().map(|g| g.is_none()).unwrap_or(true)
    }

    fn __len__(&self) -> usize {
        self.len
    }

    /// Depolarizes every qubit to the given average fidelity; returns a new token.
    fn degrade(&self, fidelity: f64) -> PyResult<PyToken> {
        let t = self.take()?;
        let noise = depolarizing(fidelity, t.len())?;
        Ok(PyToken::wrap(t.degrade(&noise).map_err(value_err)?))
    }

    fn __repr__(&self) -> String {
        format!("Token(serial='{}', n={}, consumed={})", self.serial, self.len, self.consumed())
    }
}

/// Draws a fresh qticket of `n` qubits.
#[pyfunction]
#[pyo3(signature = (n, seed))]
fn issue(n: usize, seed: u64) -> PyResult<(PySecret, PyToken)> {
    let (s, t) = qticket::issue(n, &mut RngStream::new(seed)).map_err(value_err)?;
    Ok((PySecret { inner: s }, PyToken::wrap(t)))
}

/// Measures `token` against `secret`; returns `{"accepted", "correct_count"}`.
#[pyfunction]
#[pyo3(signature = (secret, token, f_tol, seed))]
fn verify<'py>(
    py: Python<'py>,
    secret: &PySecret,
    token: &PyToken,
    f_tol: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let policy = VerifierPolicy::new(tolerance(f_tol)?, secret.inner.len());
    let out = qticket::verify(&secret.inner, token.take()?, &policy, &mut RngStream::new(seed)).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("accepted", out.accepted)?;
    d.set_item("correct_count", out.correct_count)?;
    Ok(d)
}

/// Splits `token` into two correlated counterfeits.
#[pyfunction]
#[pyo3(signature = (token, strategy_name = "universal-cloner"))]
fn clone_token(token: &PyToken, strategy_name: &str) -> PyResult<(PyToken, PyToken)> {
    let (a, b) = counterfeit(token.take()?, &strategy(strategy_name)?).map_err(value_err)?;
    Ok((PyToken::wrap(a), PyToken::wrap(b)))
}

/// `(p11, p10, p01, p00)` for measuring both clones of `label`.
#[pyfunction]
#[pyo3(signature = (strategy_name, label))]
fn pair_distribution(strategy_name: &str, label: &str) -> PyResult<(f64, f64, f64, f64)> {
    let l: StateLabel = label.parse().map_err(value_err)?;
    let d = pair_outcome_distribution(&strategy(strategy_name)?, l);
    Ok((d.p11, d.p10, d.p01, d.p00))
}

/// Exact probability that both counterfeits of an `n`-qubit ticket pass.
#[pyfunction]
#[pyo3(signature = (n, f_tol, strategy_name = "universal-cloner"))]
fn double_acceptance_exact(n: usize, f_tol: &str, strategy_name: &str) -> PyResult<f64> {
    let dist = mixed_pair_distribution(&strategy(strategy_name)?);
    qticket::double_acceptance_exact(n, tolerance(f_tol)?, dist).map_err(value_err)
}

/// Exact acceptance probability for independent per-qubit fidelities.
#[pyfunction]
fn exact_honest_acceptance(fidelities: Vec<f64>, f_tol: &str) -> PyResult<f64> {
    qticket::exact_honest_acceptance(&fidelities, tolerance(f_tol)?).map_err(value_err)
}

/// Rows of the double-acceptance sweep as dicts.
#[pyfunction]
#[pyo3(signature = (lengths, tolerances = None, trials = 0, seed = 0, strategy_name = "universal-cloner"))]
fn sweep<'py>(
    py: Python<'py>,
    lengths: Vec<usize>,
    tolerances: Option<Vec<String>>,
    trials: usize,
    seed: u64,
    strategy_name: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let tolerances = match tolerances {
        Some(ts) => ts.iter().map(|t| tolerance(t)).collect::<PyResult<_>>()?,
        None => tolerance_grid(70, 95, 1, 100),
    };
    let config = SweepConfig { strategy: strategy(strategy_name)?, lengths, tolerances, trials, seed };
    let rows = py.detach(|| sweep_double_accept(&config)).map_err(value_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("f_tol", r.f_tol)?;
            d.set_item("N", r.n)?;
            d.set_item("exact_prob", r.exact_prob)?;
            d.set_item("mc_prob", r.mc_prob)?;
            d.set_item("mc_stderr", r.mc_stderr)?;
            Ok(d)
        })
        .collect()
}

fn report<'py>(py: Python<'py>, r: Result<BoundReport, bounds::BoundsError>) -> PyResult<Bound<'py, PyDict>> {
    let r = r.map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("exponent", r.exponent)?;
    d.set_item("scale", r.scale)?;
    d.set_item("prefactor", r.prefactor)?;
    d.set_item("raw", r.raw)?;
    d.set_item("clamped", r.clamped)?;
    Ok(d)
}

#[pyfunction]
fn relative_entropy(p: f64, q: f64) -> PyResult<f64> {
    bounds::relative_entropy(p, q).map_err(value_err)
}

#[pyfunction]
fn soundness_bound(py: Python<'_>, n: u64, f_exp: f64, f_tol: f64) -> PyResult<Bound<'_, PyDict>> {
    report(py, bounds::soundness_bound(n, f_exp, f_tol))
}

#[pyfunction]
fn security_bound(py: Python<'_>, n: u64, f_tol: f64) -> PyResult<Bound<'_, PyDict>> {
    report(py, bounds::security_bound(n, f_tol))
}

#[pyfunction]
fn learning_bound(py: Python<'_>, n: u64, f_tol: f64, v: u64) -> PyResult<Bound<'_, PyDict>> {
    report(py, bounds::learning_bound(n, f_tol, v))
}

#[pyfunction]
fn cv_soundness_bound(py: Python<'_>, n: u64, r: u64, f_exp: f64, f_tol: f64) -> PyResult<Bound<'_, PyDict>> {
    report(py, bounds::cv_soundness_bound(n, r, f_exp, f_tol))
}

#[pyfunction]
fn cv_security_bound(py: Python<'_>, n: u64, r: u64, f_tol: f64, v: u64) -> PyResult<Bound<'_, PyDict>> {
    report(py, bounds::cv_security_bound(n, r, f_tol, v))
}

/// `(numerator, denominator)` of the tolerance needed with `c` copies.
#[pyfunction]
fn multicopy_threshold(c: u64) -> PyResult<(u64, u64)> {
    let t = bounds::multicopy_threshold(c).map_err(value_err)?;
    Ok((*t.numer(), *t.denom()))
}

#[pyfunction]
fn cv_threshold() -> f64 {
    bounds::cv_threshold()
}

/// Selective values of the four pair games and their mixed average.
#[pyfunction]
fn game_values(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let g = build_cv_pair_games().map_err(value_err)?;
    let d = PyDict::new(py);
    for (name, game) in [("G_Z", &g.z), ("G_X", &g.x), ("G_and", &g.and), ("G_avg", &g.avg)] {
        d.set_item(name, Game::selective_value(game).map_err(value_err)?)?;
    }
    d.set_item("mixed", g.mixed_average().map_err(value_err)?)?;
    Ok(d)
}

/// A cv ticket: issuer secret plus the holder's token, redeemable once.
#[pyclass(name = "CvTicket", frozen)]
struct PyCvTicket {
    account: Mutex<CvAccount>,
    token: cv::CvToken,
}

#[pymethods]
impl PyCvTicket {
    #[new]
    #[pyo3(signature = (n, r, f_tol, seed, frames = false))]
    fn new(n: usize, r: usize, f_tol: &str, seed: u64, frames: bool) -> PyResult<Self> {
        let layout = CvLayout::new(n, r, tolerance(f_tol)?).map_err(value_err)?;
        let (secret, token) = cv::cv_issue(layout, frames, &mut RngStream::new(seed));
        Ok(Self { account: Mutex::new(CvAccount::new(secret)), token })
    }

    #[getter]
    fn serial(&self) -> String {
        self.token.serial().to_string()
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.token.qubits().len()
    }

    /// One challenge-response round with an honest holder; returns
    /// `{"accepted", "reason"}`. State carries over between calls.
    #[pyo3(signature = (seed, policy = "random", fidelity = None))]
    fn redeem<'py>(
        &self,
        py: Python<'py>,
        seed: u64,
        policy: &str,
        fidelity: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let policy: QuestionPolicy = policy.parse().map_err(value_err)?;
        let noise = fidelity.map(|f| depolarizing(f, self.token.qubits().len())).transpose()?;
        let mut acc = self.account.lock().map_err(|_| PyRuntimeError::new_err("ticket lock poisoned"))?;
        let rng = RngStream::new(seed);
        let verifier = CvVerifier::new(policy, None, rng.substream(1));
        verifier.insert(acc.clone());
        let mut holder = HolderSession::honest(self.token.clone(), noise, rng.substream(2));
        let mut session = verifier.session();
        let mut msg = holder.hello();
        while !session.is_done() {
            let reply = session.handle(msg);
            match holder.handle(reply) {
                Some(m) => msg = m,
                None => break,
            }
        }
        let outcome = session.outcome().cloned().ok_or_else(|| PyRuntimeError::new_err("session did not finish"))?;
        *acc = verifier.account(acc.secret.serial).expect("account was inserted");
        let d = PyDict::new(py);
        d.set_item("accepted", outcome.accepted)?;
        d.set_item("reason", outcome.reason.map(|r| r.as_str()))?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let l = self.token.layout();
        format!("CvTicket(serial='{}', n={}, r={}, f_tol='{}')", self.token.serial(), l.n, l.r, l.f_tol)
    }
}

/// Runs the two-verifier double-spend experiment.
#[pyfunction]
#[pyo3(signature = (n, r, f_tol, trials, seed, attacker = "intermediate-basis", pairing = "independent"))]
fn double_spend<'py>(
    py: Python<'py>,
    n: usize,
    r: usize,
    f_tol: &str,
    trials: usize,
    seed: u64,
    attacker: &str,
    pairing: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let layout = CvLayout::new(n, r, tolerance(f_tol)?).map_err(value_err)?;
    let attacker: CvAttacker = attacker.parse().map_err(value_err)?;
    let pairing = match pairing {
        "independent" => Pairing::Independent,
        "complementary" => Pairing::Complementary,
        other => return Err(PyValueError::new_err(format!("unknown pairing {other:?}"))),
    };
    let rng = RngStream::new(seed);
    let rep = py.detach(|| cv::double_spend_experiment(layout, attacker, pairing, trials, &rng));
    let d = PyDict::new(py);
    d.set_item("trials", rep.trials)?;
    d.set_item("joint_accepts", rep.joint_accepts)?;
    d.set_item("rate", rep.rate)?;
    d.set_item("bound", rep.bound)?;
    d.set_item("pair_utility", rep.pair_utility)?;
    d.set_item("scored_success", rep.scored_success)?;
    Ok(d)
}

#[pymodule]
fn qtickets_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySecret>()?;
    m.add_class::<PyToken>()?;
    m.add_class::<PyCvTicket>()?;
    m.add_function(wrap_pyfunction!(issue, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(clone_token, m)?)?;
    m.add_function(wrap_pyfunction!(pair_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(double_acceptance_exact, m)?)?;
    m.add_function(wrap_pyfunction!(exact_honest_acceptance, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(relative_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(soundness_bound, m)?)?;
    m.add_function(wrap_pyfunction!(security_bound, m)?)?;
    m.add_function(wrap_pyfunction!(learning_bound, m)?)?;
    m.add_function(wrap_pyfunction!(cv_soundness_bound, m)?)?;
    m.add_function(wrap_pyfunction!(cv_security_bound, m)?)?;
    m.add_function(wrap_pyfunction!(multicopy_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(cv_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(game_values, m)?)?;
    m.add_function(wrap_pyfunction!(double_spend, m)?)?;
    Ok(())
}
