use crate::{Error, Result};

/// Every on/off combination of the signals decoded after user `k`.
///
/// Row `i` (0-based) is the binary expansion of `i`, most significant bit
/// first, so column 0 belongs to user `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferencePattern {
    pub users: usize,
    pub order: usize,
    pub rows: Vec<Vec<bool>>,
}

impl InterferencePattern {
    pub fn columns(&self) -> usize {
        self.users - self.order
    }
}

pub fn interference_matrix(users: usize, order: usize) -> Result<InterferencePattern> {
    if order == 0 || order > users {
        return Err(Error::InvalidConfig(format!(
            "decoding order {order} outside 1..={users}"
        )));
    }
    let cols = users - order;
    let rows = (0..1usize << cols)
        .map(|i| (0..cols).map(|c| i >> (cols - 1 - c) & 1 == 1).collect())
        .collect();
    Ok(InterferencePattern { users, order, rows })
}

/// Residual interference `sum_l P_l A_il` for every row, in row order.
pub(crate) fn interference_levels(powers: &[f64], order: usize) -> impl Iterator<Item = f64> + '_ {
    let tail = &powers[order..];
    let cols = tail.len();
    (0..1usize << cols).map(move |i| {
        tail.iter()
            .enumerate()
            .filter(|(c, _)| i >> (cols - 1 - c) & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let last = interference_matrix(3, 3).unwrap();
        assert_eq!(last.rows, vec![Vec::<bool>::new()]);

        let first = interference_matrix(3, 1).unwrap();
        assert_eq!(
            first.rows,
            vec![
                vec![false, false],
                vec![false, true],
                vec![true, false],
                vec![true, true]
            ]
        );

        let m = interference_matrix(4, 2).unwrap();
        assert_eq!(m.rows.len(), 4);
        assert!(m.rows.iter().all(|r| r.len() == 2));
        let mut seen: Vec<_> = m.rows.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);

        assert!(interference_matrix(3, 0).is_err());
        assert!(interference_matrix(3, 4).is_err());
    }

    #[test]
    fn levels_follow_rows() {
        let powers = [0.5, 0.25, 0.125, 0.0625];
        for k in 1..=4 {
            let m = interference_matrix(4, k).unwrap();
            let levels: Vec<f64> = interference_levels(&powers, k).collect();
            assert_eq!(levels.len(), 1 << (4 - k));
            for (row, level) in m.rows.iter().zip(levels) {
                let direct: f64 = row
                    .iter()
                    .zip(&powers[k..])
                    .filter(|(a, _)| **a)
                    .map(|(_, p)| p)
                    .sum();
                assert_eq!(direct, level);
            }
        }
    }
}
