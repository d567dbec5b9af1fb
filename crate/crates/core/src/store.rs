//! JSON secret store shared by qticket and cv verifiers, plus token files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cv::{ChallengeQuestion, CvAccount, CvLayout, CvSecret, CvToken, PairLabel};
use crate::linalg::{Op2, C64};
use crate::qticket::{QticketRecord, TokenInstance};
use crate::quantum::{Frame, Qubit, StateLabel};
use crate::serial::Serial;
use crate::tolerance::Tolerance;

pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("store format: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported store version {0}")]
    Version(u32),
    #[error("duplicate serial {0}")]
    DuplicateSerial(Serial),
    #[error("invalid record: {0}")]
    Invalid(String),
}

/// Verifier state for one cv ticket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvRecord {
    pub serial: Serial,
    pub n: usize,
    pub r: usize,
    pub f_tol: Tolerance,
    /// Block-major `(first, second)` labels, `n * r` entries.
    pub pairs: Vec<[StateLabel; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<u8>>,
    #[serde(default)]
    pub attempts: u64,
    #[serde(default)]
    pub accepted_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_question: Option<ChallengeQuestion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_question: Option<ChallengeQuestion>,
}

impl CvRecord {
    pub fn from_secret(secret: &CvSecret) -> Self {
        Self::from_account(&CvAccount::new(secret.clone()))
    }

    pub fn from_account(acc: &CvAccount) -> Self {
        let s = &acc.secret;
        Self {
            serial: s.serial,
            n: s.layout.n,
            r: s.layout.r,
            f_tol: s.layout.f_tol,
            pairs: s.pairs.iter().flatten().map(|p| p.labels()).collect(),
            frames: s.frames.as_ref().map(|f| f.iter().map(|x| x.index() as u8).collect()),
            attempts: acc.attempts,
            accepted_count: acc.accepted_count,
            fixed_question: acc.fixed_question.clone(),
            last_question: acc.last_question.clone(),
        }
    }

    pub fn to_account(&self) -> Result<CvAccount, StoreError> {
        let layout = CvLayout::new(self.n, self.r, self.f_tol).map_err(|e| StoreError::Invalid(e.to_string()))?;
        if self.pairs.len() != layout.pairs() {
            return Err(StoreError::Invalid(format!("{} pairs for a {}x{} layout", self.pairs.len(), self.n, self.r)));
        }
        let flat = self
            .pairs
            .iter()
            .map(|p| PairLabel::from_labels(*p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| StoreError::Invalid(e.to_string()))?;
        let pairs = flat.chunks(self.r).map(<[PairLabel]>::to_vec).collect();
        let frames = match &self.frames {
            None => None,
            Some(f) if f.len() == layout.qubits() => Some(
                f.iter()
                    .map(|i| Frame::from_index(*i as usize).ok_or_else(|| StoreError::Invalid(format!("frame {i}"))))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            Some(f) => return Err(StoreError::Invalid(format!("{} frames for {} qubits", f.len(), layout.qubits()))),
        };
        Ok(CvAccount {
            secret: CvSecret { serial: self.serial, layout, pairs, frames },
            attempts: self.attempts,
            accepted_count: self.accepted_count,
            fixed_question: self.fixed_question.clone(),
            last_question: self.last_question.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StoreRecord {
    Qticket(QticketRecord),
    Cv(CvRecord),
}

impl StoreRecord {
    pub fn serial(&self) -> Serial {
        match self {
            StoreRecord::Qticket(r) => r.serial,
            StoreRecord::Cv(r) => r.serial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Store {
    pub version: u32,
    pub serials: Vec<StoreRecord>,
}

impl Default for Store {
    fn default() -> Self {
        Self { version: STORE_VERSION, serials: Vec::new() }
    }
}

impl Store {
    /// Loads `path`, or an empty store if it does not exist.
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let store: Store = serde_json::from_str(text)?;
        if store.version != STORE_VERSION {
            return Err(StoreError::Version(store.version));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &store.serials {
            if !seen.insert(r.serial()) {
                return Err(StoreError::DuplicateSerial(r.serial()));
            }
        }
        Ok(store)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("store always serializes")
    }

    /// Writes to a sibling temporary file and renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = path.file_name().ok_or_else(|| StoreError::Invalid("store path has no file name".into()))?;
        let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_json().as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn find(&self, serial: Serial) -> Option<&StoreRecord> {
        self.serials.iter().find(|r| r.serial() == serial)
    }

    pub fn add(&mut self, record: StoreRecord) -> Result<(), StoreError> {
        if self.find(record.serial()).is_some() {
            return Err(StoreError::DuplicateSerial(record.serial()));
        }
        self.serials.push(record);
        Ok(())
    }

    /// Replaces the record with the same serial.
    pub fn update(&mut self, record: StoreRecord) -> Result<(), StoreError> {
        let serial = record.serial();
        let slot = self
            .serials
            .iter_mut()
            .find(|r| r.serial() == serial)
            .ok_or_else(|| StoreError::Invalid(format!("no record for {serial}")))?;
        *slot = record;
        Ok(())
    }
}

/// Density matrix as `[[re, im]; 2]` rows.
type WireQubit = [[[f64; 2]; 2]; 2];

fn qubit_to_wire(q: &Qubit) -> WireQubit {
    let m = q.operator();
    [0, 1].map(|r| [0, 1].map(|c| [m[(r, c)].re, m[(r, c)].im]))
}

fn qubit_from_wire(w: &WireQubit) -> Result<Qubit, StoreError> {
    let rows = [0, 1].map(|r| [0, 1].map(|c| C64::new(w[r][c][0], w[r][c][1])));
    Qubit::new(Op2::from_rows(rows)).map_err(|e| StoreError::Invalid(e.to_string()))
}

/// Serialized holder-side token. Correlated counterfeits cannot be saved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TokenFile {
    Qticket {
        serial: Serial,
        qubits: Vec<WireQubit>,
    },
    Cv {
        serial: Serial,
        n: usize,
        r: usize,
        f_tol: Tolerance,
        qubits: Vec<WireQubit>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frames: Option<Vec<u8>>,
    },
}

impl TokenFile {
    pub fn from_qticket(token: TokenInstance) -> Result<Self, StoreError> {
        let (serial, qubits) = token.into_product().map_err(|e| StoreError::Invalid(e.to_string()))?;
        Ok(TokenFile::Qticket { serial, qubits: qubits.iter().map(qubit_to_wire).collect() })
    }

    pub fn from_cv(token: &CvToken) -> Self {
        let l = token.layout();
        TokenFile::Cv {
            serial: token.serial(),
            n: l.n,
            r: l.r,
            f_tol: l.f_tol,
            qubits: token.qubits().iter().map(qubit_to_wire).collect(),
            frames: token.frames().map(|f| f.iter().map(|x| x.index() as u8).collect()),
        }
    }

    pub fn serial(&self) -> Serial {
        match self {
            TokenFile::Qticket { serial, .. } | TokenFile::Cv { serial, .. } => *serial,
        }
    }

    pub fn into_qticket(self) -> Result<TokenInstance, StoreError> {
        match self {
            TokenFile::Qticket { serial, qubits } => Ok(TokenInstance::new(
                serial,
                qubits.iter().map(qubit_from_wire).collect::<Result<_, _>>()?,
            )),
            TokenFile::Cv { .. } => Err(StoreError::Invalid("token file holds a cv ticket".into())),
        }
    }

    pub fn into_cv(self) -> Result<CvToken, StoreError> {
        match self {
            TokenFile::Cv { serial, n, r, f_tol, qubits, frames } => {
                let layout = CvLayout::new(n, r, f_tol).map_err(|e| StoreError::Invalid(e.to_string()))?;
                let qubits = qubits.iter().map(qubit_from_wire).collect::<Result<_, _>>()?;
                let frames = frames
                    .map(|f| {
                        f.iter()
                            .map(|i| Frame::from_index(*i as usize).ok_or_else(|| StoreError::Invalid(format!("frame {i}"))))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .transpose()?;
                CvToken::from_parts(serial, layout, qubits, frames).map_err(|e| StoreError::Invalid(e.to_string()))
            }
            TokenFile::Qticket { .. } => Err(StoreError::Invalid("token file holds a qticket".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::cv_issue;
    use crate::qticket::{issue, QticketRecord};
    use crate::rng::RngStream;

    #[test]
    fn store_round_trip_and_schema() {
        let mut rng = RngStream::new(1);
        let (qs, _) = issue(3, &mut rng).unwrap();
        let layout = CvLayout::new(4, 2, Tolerance::new(3, 4).unwrap()).unwrap();
        let (cs, _) = cv_issue(layout, true, &mut rng);
        let mut store = Store::default();
        store.add(StoreRecord::Qticket(QticketRecord::new(qs.clone(), Tolerance::new(9, 10).unwrap(), 2))).unwrap();
        store.add(StoreRecord::Cv(CvRecord::from_secret(&cs))).unwrap();
        let json = store.to_json();
        assert!(json.contains("\"f_tol\": \"9/10\"") && json.contains("\"issued_copies\": 2"));
        let back = Store::from_json(&json).unwrap();
        assert_eq!(back, store);
        let StoreRecord::Cv(rec) = &back.serials[1] else { panic!("cv record expected") };
        assert_eq!(rec.pairs.len(), 8);
        assert_eq!(rec.to_account().unwrap().secret, cs);
        assert!(matches!(store.add(back.serials[0].clone()), Err(StoreError::DuplicateSerial(_))));
    }

    #[test]
    fn store_rejects_unknown_fields_and_versions() {
        let rec = r#"{"serial":"00000000000000000000000000000001","labels":["Z+"],"f_tol":"1/2","issued_copies":1,"accepted_count":0,"color":"red"}"#;
        assert!(Store::from_json(&format!(r#"{{"version":1,"serials":[{rec}]}}"#)).is_err());
        assert!(matches!(Store::from_json(r#"{"version":9,"serials":[]}"#), Err(StoreError::Version(9))));
        let bad_label = r#"{"serial":"00000000000000000000000000000001","labels":["Q+"],"f_tol":"1/2","issued_copies":1,"accepted_count":0}"#;
        assert!(Store::from_json(&format!(r#"{{"version":1,"serials":[{bad_label}]}}"#)).is_err());
    }

    #[test]
    fn atomic_save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        assert_eq!(Store::load(&path).unwrap(), Store::default());
        let mut store = Store::default();
        let (qs, _) = issue(2, &mut RngStream::new(2)).unwrap();
        store.add(StoreRecord::Qticket(QticketRecord::new(qs, Tolerance::new(1, 2).unwrap(), 1))).unwrap();
        store.save(&path).unwrap();
        assert_eq!(Store::load(&path).unwrap(), store);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn token_files_round_trip() {
        let mut rng = RngStream::new(3);
        let (qs, tok) = issue(4, &mut rng).unwrap();
        let file = TokenFile::from_qticket(tok).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let back: TokenFile = serde_json::from_str(&text).unwrap();
        let tok = back.into_qticket().unwrap();
        for (q, l) in tok.qubit_states().iter().zip(&qs.labels) {
            assert!(q.operator().max_abs_diff(&l.projector()) < 1e-15);
        }
        let layout = CvLayout::new(2, 3, Tolerance::new(1, 1).unwrap()).unwrap();
        let (_, ct) = cv_issue(layout, true, &mut rng);
        let back = TokenFile::from_cv(&ct).into_cv().unwrap();
        assert_eq!(back.frames(), ct.frames());
        assert_eq!(back.qubits().len(), 12);
    }
}
