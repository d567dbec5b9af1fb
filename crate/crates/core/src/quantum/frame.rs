use std::sync::OnceLock;

use super::state::StateLabel;
use crate::linalg::{Op2, C64, I, ONE, ZERO};
use crate::rng::RngStream;

pub const FRAME_COUNT: usize = 24;

/// A single-qubit Clifford rotation used to remap the nominal preparation
/// axes of a qubit onto random physical axes. Cliffords permute the six
/// polarization eigenstates, so a remapped qubit is still one of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frame(u8);

struct FrameTable {
    unitaries: Vec<Op2>,
    // images[f][l] = index into StateLabel::ALL of U_f |l>
    images: Vec<[u8; 6]>,
}

fn canonical(u: &Op2) -> Op2 {
    // strip the global phase using the first entry with non-negligible magnitude
    let pivot = u.rows().iter().flatten().copied().find(|z| z.norm() > 1e-9).unwrap_or(ONE);
    u.scale_complex(pivot.conj() / pivot.norm())
}

fn table() -> &'static FrameTable {
    static TABLE: OnceLock<FrameTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let hadamard = Op2::from_rows([[h, h], [h, -h]]);
        let phase = Op2::from_rows([[ONE, ZERO], [ZERO, I]]);
        let mut group = vec![Op2::identity()];
        let mut frontier = vec![Op2::identity()];
        while let Some(g) = frontier.pop() {
            for gen in [&hadamard, &phase] {
                let next = canonical(&gen.matmul(&g));
                if !group.iter().any(|x| x.max_abs_diff(&next) < 1e-9) {
                    group.push(next);
                    frontier.push(next);
                }
            }
        }
        assert_eq!(group.len(), FRAME_COUNT, "single-qubit Clifford group has 24 elements mod phase");
        let images = group
            .iter()
            .map(|u| {
                let mut row = [0u8; 6];
                for (k, l) in StateLabel::ALL.iter().enumerate() {
                    let img = l.projector().conjugate_by(u);
                    let j = StateLabel::ALL
                        .iter()
                        .position(|m| m.projector().max_abs_diff(&img) < 1e-9)
                        .expect("Clifford maps Pauli eigenstates to Pauli eigenstates");
                    row[k] = j as u8;
                }
                row
            })
            .collect();
        FrameTable { unitaries: group, images }
    })
}

impl Frame {
    pub fn identity() -> Self {
        Frame(0)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < FRAME_COUNT).then_some(Frame(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn random(rng: &mut RngStream) -> Self {
        Frame(rng.below(FRAME_COUNT) as u8)
    }

    pub fn unitary(self) -> Op2 {
        table().unitaries[self.index()]
    }

    /// Physical label of a qubit nominally prepared as `label`.
    pub fn apply(self, label: StateLabel) -> StateLabel {
        let k = StateLabel::ALL.iter().position(|l| *l == label).unwrap();
        StateLabel::ALL[table().images[self.index()][k] as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_permute_labels_and_cover_axes() {
        let mut axes_hit = std::collections::HashSet::new();
        for f in 0..FRAME_COUNT {
            let frame = Frame::from_index(f).unwrap();
            let imgs: std::collections::HashSet<_> = StateLabel::ALL.iter().map(|l| frame.apply(*l)).collect();
            assert_eq!(imgs.len(), 6);
            for l in StateLabel::ALL {
                assert_eq!(frame.apply(l.orthogonal()), frame.apply(l).orthogonal());
                let u = frame.unitary();
                assert!(l.projector().conjugate_by(&u).max_abs_diff(&frame.apply(l).projector()) < 1e-12);
            }
            axes_hit.insert(frame.apply(StateLabel::XPlus).axis());
        }
        assert_eq!(axes_hit.len(), 3);
        assert!(Frame::from_index(24).is_none());
    }
}
