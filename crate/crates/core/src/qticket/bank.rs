use std::collections::HashMap;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{verify, QticketError, QticketSecret, TokenInstance, VerificationOutcome, VerifierPolicy};
use crate::quantum::StateLabel;
use crate::rng::RngStream;
use crate::serial::Serial;
use crate::tolerance::Tolerance;

/// Persisted verifier state for one serial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QticketRecord {
    pub serial: Serial,
    pub labels: Vec<StateLabel>,
    pub f_tol: Tolerance,
    pub issued_copies: u64,
    pub accepted_count: u64,
}

impl QticketRecord {
    pub fn new(secret: QticketSecret, f_tol: Tolerance, issued_copies: u64) -> Self {
        Self { serial: secret.serial, labels: secret.labels, f_tol, issued_copies, accepted_count: 0 }
    }

    pub fn secret(&self) -> QticketSecret {
        QticketSecret { serial: self.serial, labels: self.labels.clone() }
    }

    pub fn policy(&self) -> VerifierPolicy {
        VerifierPolicy::new(self.f_tol, self.labels.len())
    }
}

/// Verifier holding many secrets. Each serial accepts at most
/// `issued_copies` times; the counter is checked and bumped under the
/// serial's own lock, so distinct serials never contend.
#[derive(Debug, Default)]
pub struct QticketVerifier {
    records: RwLock<HashMap<Serial, Mutex<QticketRecord>>>,
}

impl QticketVerifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = QticketRecord>) -> Result<Self, QticketError> {
        let bank = Self::new();
        for r in records {
            bank.insert(r)?;
        }
        Ok(bank)
    }

    pub fn insert(&self, record: QticketRecord) -> Result<(), QticketError> {
        let mut map = self.records.write().unwrap();
        if map.contains_key(&record.serial) {
            return Err(QticketError::DuplicateSerial(record.serial));
        }
        map.insert(record.serial, Mutex::new(record));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn record(&self, serial: Serial) -> Option<QticketRecord> {
        self.records.read().unwrap().get(&serial).map(|m| m.lock().unwrap().clone())
    }

    /// Snapshot sorted by serial.
    pub fn records(&self) -> Vec<QticketRecord> {
        let mut out: Vec<_> = self.records.read().unwrap().values().map(|m| m.lock().unwrap().clone()).collect();
        out.sort_by_key(|r| r.serial);
        out
    }

    /// Verifies `token` against its serial's secret and counts an acceptance.
    /// Fails with `SerialExhausted` once every issued copy has been accepted.
    pub fn redeem(&self, token: TokenInstance, rng: &mut RngStream) -> Result<VerificationOutcome, QticketError> {
        let serial = token.serial();
        let map = self.records.read().unwrap();
        let mut rec = map.get(&serial).ok_or(QticketError::UnknownSerial(serial))?.lock().unwrap();
        if rec.accepted_count >= rec.issued_copies {
            return Err(QticketError::SerialExhausted(serial));
        }
        let out = verify(&rec.secret(), token, &rec.policy(), rng)?;
        if out.accepted {
            rec.accepted_count += 1;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qticket::multicopy_issue;

    #[test]
    fn copies_exhaust_after_c_acceptances() {
        let mut rng = RngStream::new(21);
        let (secret, tokens) = multicopy_issue(8, 3, &mut rng).unwrap();
        let bank = QticketVerifier::new();
        bank.insert(QticketRecord::new(secret.clone(), Tolerance::new(1, 1).unwrap(), 3)).unwrap();
        for tok in tokens {
            assert!(bank.redeem(tok, &mut rng).unwrap().accepted);
        }
        assert!(matches!(bank.redeem(secret.prepare(), &mut rng), Err(QticketError::SerialExhausted(_))));
        assert_eq!(bank.record(secret.serial).unwrap().accepted_count, 3);
    }

    #[test]
    fn unknown_and_duplicate_serials() {
        let mut rng = RngStream::new(1);
        let (secret, _) = multicopy_issue(2, 1, &mut rng).unwrap();
        let bank = QticketVerifier::new();
        assert!(matches!(bank.redeem(secret.prepare(), &mut rng), Err(QticketError::UnknownSerial(_))));
        let rec = QticketRecord::new(secret, Tolerance::new(1, 2).unwrap(), 1);
        bank.insert(rec.clone()).unwrap();
        assert!(matches!(bank.insert(rec), Err(QticketError::DuplicateSerial(_))));
    }

    #[test]
    fn concurrent_redemptions_never_exceed_copies() {
        let mut rng = RngStream::new(8);
        let (secret, tokens) = multicopy_issue(4, 16, &mut rng).unwrap();
        let bank = QticketVerifier::new();
        bank.insert(QticketRecord::new(secret.clone(), Tolerance::new(1, 1).unwrap(), 5)).unwrap();
        let accepted = std::thread::scope(|s| {
            let handles: Vec<_> = tokens
                .into_iter()
                .enumerate()
                .map(|(i, tok)| {
                    let bank = &bank;
                    s.spawn(move || bank.redeem(tok, &mut RngStream::with_stream(8, i as u64)).is_ok_and(|o| o.accepted))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).filter(|&a| a).count()
        });
        assert_eq!(accepted, 5);
    }
}
