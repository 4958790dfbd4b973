#![allow(dead_code)]

use fairgrad::data::{gen_synthetic, Dataset, SyntheticCell, SyntheticSpec};

/// Two features: the first separates the labels (±`sep`), the second
/// shifts with the sensitive group (±`shift`). Cells are listed as
/// (y=1,s=0), (y=0,s=0), (y=1,s=1), (y=0,s=1).
pub fn gaussian_spec(counts: [usize; 4], sep: f64, shift: f64, seed: u64) -> SyntheticSpec {
    let keys = [(1, 0), (0, 0), (1, 1), (0, 1)];
    SyntheticSpec {
        cells: keys
            .iter()
            .zip(counts)
            .map(|(&(y, s), count)| SyntheticCell {
                label: y,
                sensitive: s,
                mean: vec![
                    if y == 1 { sep } else { -sep },
                    if s == 0 { shift } else { -shift },
                ],
                count,
            })
            .collect(),
        std: 1.0,
        seed,
    }
}

pub fn gaussian(counts: [usize; 4], sep: f64, shift: f64, seed: u64) -> Dataset {
    gen_synthetic(&gaussian_spec(counts, sep, shift, seed)).unwrap()
}

/// Group 1 is an exact copy of group 0.
pub fn mirrored(base: &Dataset) -> Dataset {
    let n = base.len();
    let x = ndarray::concatenate(
        ndarray::Axis(0),
        &[base.features().view(), base.features().view()],
    )
    .unwrap();
    let labels = [base.labels(), base.labels()].concat();
    let sensitive = (0..2 * n).map(|i| usize::from(i >= n)).collect();
    Dataset::new(x, labels, sensitive, base.label_count(), 2).unwrap()
}
