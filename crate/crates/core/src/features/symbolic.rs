//! Symbolic-dynamics and ordinal-pattern complexity measures.

/// Probability of constant symbol words.
///
/// Increments are symbolized as 1 when `|x[i+1] - x[i]| >= d`, else 0. The
/// result is the fraction of the `n - word_len` overlapping words of length
/// `word_len` that are all zeros or all ones.
pub fn polvar(x: &[f64], d: f64, word_len: usize) -> Option<f64> {
    if word_len < 2 || !(d > 0.0) || x.len() < word_len + 1 {
        return None;
    }
    let symbols: Vec<bool> = x.windows(2).map(|w| (w[1] - w[0]).abs() >= d).collect();
    let n_words = symbols.len() - word_len + 1;
    // run length of equal symbols ending at each position
    let mut run = 0usize;
    let mut constant = 0usize;
    for i in 0..symbols.len() {
        run = if i > 0 && symbols[i] == symbols[i - 1] { run + 1 } else { 1 };
        if i + 1 >= word_len && run >= word_len {
            constant += 1;
        }
    }
    Some(constant as f64 / n_words as f64)
}

fn factorial(m: usize) -> usize {
    (1..=m).product()
}

/// Lehmer-code index of the ordinal pattern of `window`; ties rank the
/// earlier element lower.
fn pattern_index(window: &[f64]) -> usize {
    let m = window.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| window[a].total_cmp(&window[b]).then(a.cmp(&b)));
    let mut index = 0;
    for i in 0..m {
        let smaller_after = order[i + 1..].iter().filter(|&&o| o < order[i]).count();
        index = index * (m - i) + smaller_after;
    }
    index
}

/// Normalized permutation entropy of order `m` with delay `tau`:
/// Shannon entropy of the ordinal-pattern histogram divided by `ln(m!)`.
pub fn permutation_entropy(x: &[f64], m: usize, tau: usize) -> Option<f64> {
    if !(3..=6).contains(&m) || tau == 0 {
        return None;
    }
    let span = (m - 1) * tau;
    if x.len() < span + 1 {
        return None;
    }
    let mut counts = vec![0usize; factorial(m)];
    let mut window = vec![0.0; m];
    let n = x.len() - span;
    for t in 0..n {
        for (j, w) in window.iter_mut().enumerate() {
            *w = x[t + j * tau];
        }
        counts[pattern_index(&window)] += 1;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum();
    Some(h / (factorial(m) as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polvar_extremes() {
        assert_eq!(polvar(&[5.0; 30], 3.0, 5), Some(1.0));
        let alt: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 0.0 } else { 10.0 }).collect();
        assert_eq!(polvar(&alt, 5.0, 5), Some(1.0));
        assert_eq!(polvar(&[1.0; 5], 3.0, 5), None);
        assert_eq!(polvar(&[1.0; 6], 3.0, 5), Some(1.0));
    }

    #[test]
    fn pattern_indices_are_a_bijection() {
        let mut seen = std::collections::BTreeSet::new();
        let perms = [
            [0.0, 1.0, 2.0],
            [0.0, 2.0, 1.0],
            [1.0, 0.0, 2.0],
            [1.0, 2.0, 0.0],
            [2.0, 0.0, 1.0],
            [2.0, 1.0, 0.0],
        ];
        for p in perms {
            seen.insert(pattern_index(&p));
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
        // tie: earlier index ranks lower, same as strictly increasing
        assert_eq!(pattern_index(&[1.0, 1.0, 1.0]), pattern_index(&[0.0, 1.0, 2.0]));
    }

    #[test]
    fn entropy_extremes() {
        let inc: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(permutation_entropy(&inc, 4, 2), Some(0.0));
        // with tau = 6 the six embedding vectors are the columns of a 3x6
        // block, one per ordinal pattern
        let perms = [
            [0.0, 1.0, 2.0],
            [0.0, 2.0, 1.0],
            [1.0, 0.0, 2.0],
            [1.0, 2.0, 0.0],
            [2.0, 0.0, 1.0],
            [2.0, 1.0, 0.0],
        ];
        let x: Vec<f64> = (0..3).flat_map(|row| perms.iter().map(move |p| p[row])).collect();
        let h = permutation_entropy(&x, 3, 6).unwrap();
        assert!((h - 1.0).abs() < 1e-12, "{h}");
        assert_eq!(permutation_entropy(&[0.0; 3], 3, 1), Some(0.0));
        assert_eq!(permutation_entropy(&[1.0, 2.0], 3, 1), None);
        assert_eq!(permutation_entropy(&inc, 7, 1), None);
    }
}
