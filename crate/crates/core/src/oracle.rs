//! Brute-force reference computations. Each function here recomputes, by
//! direct enumeration, a quantity that some other module produces by a
//! smarter route. The test suites compare the two. Nothing in this module
//! calls into the modules it checks, so an agreement failure always points
//! at exactly one side.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for brute force: {0}")]
    TooLarge(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Compensated (Kahan) accumulator. The 1e-12 agreement targets leave no
/// room for naive summation error across long sweeps.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

fn table_bits(table: &[bool], delta: f64) -> Result<u32, OracleError> {
    if table.is_empty() || !table.len().is_power_of_two() {
        return Err(OracleError::InvalidParams(format!(
            "truth table length {} is not a power of two",
            table.len()
        )));
    }
    let t = table.len().trailing_zeros();
    if t > 16 {
        return Err(OracleError::TooLarge(format!("{t} input bits, limit 16")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(OracleError::InvalidParams(format!(
            "flip rate {delta} outside [0, 1]"
        )));
    }
    Ok(t)
}

/// Noise sensitivity of a boolean function by direct enumeration: the
/// probability that f(x) != f(x ^ e) for uniform x and an independent flip
/// pattern e with each bit set with probability `delta`.
///
/// `table[x]` is the value of f on input x, with bit i of the index holding
/// input coordinate i.
pub fn noise_sensitivity_bruteforce(table: &[bool], delta: f64) -> Result<f64, OracleError> {
    let t = table_bits(table, delta)?;
    let size = table.len();
    let mut acc = Kahan::default();
    for e in 0..size {
        let wt = e.count_ones();
        let weight = delta.powi(wt as i32) * (1.0 - delta).powi((t - wt) as i32);
        if weight == 0.0 {
            continue;
        }
        let mut disagree = 0u64;
        for x in 0..size {
            disagree += (table[x] != table[x ^ e]) as u64;
        }
        acc.add(weight * disagree as f64);
    }
    Ok(acc.value() / size as f64)
}

/// Noise sensitivity through the spectral identity: with W_i the total
/// squared Fourier weight of the +/-1-valued f at level i,
///
/// ```text
/// NS_delta[f] = 1/2 * sum_i (1 - (1 - 2 delta)^i) * W_i
/// ```
///
/// The weights come from a full Walsh-Hadamard transform of the table.
pub fn noise_sensitivity_fourier(table: &[bool], delta: f64) -> Result<f64, OracleError> {
    let t = table_bits(table, delta)?;
    let size = table.len();
    let mut g: Vec<f64> = table.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
    let mut half = 1;
    while half < size {
        for block in (0..size).step_by(2 * half) {
            for i in block..block + half {
                let (a, b) = (g[i], g[i + half]);
                g[i] = a + b;
                g[i + half] = a - b;
            }
        }
        half *= 2;
    }
    let mut levels = vec![Kahan::default(); t as usize + 1];
    for (s, &coef) in g.iter().enumerate() {
        let hat = coef / size as f64;
        levels[s.count_ones() as usize].add(hat * hat);
    }
    let shrink = 1.0 - 2.0 * delta;
    let mut acc = Kahan::default();
    for (i, level) in levels.iter().enumerate() {
        acc.add((1.0 - shrink.powi(i as i32)) * level.value());
    }
    Ok(0.5 * acc.value())
}

/// Exact total variation distance between Bin(t, k/N) and the
/// hypergeometric law of t draws without replacement from a population of
/// N with k marked elements. Both pmfs are enumerated directly.
pub fn tvd_binomial_hypergeometric(n_pop: u64, k: u64, t: u64) -> Result<f64, OracleError> {
    if k > n_pop || t > n_pop {
        return Err(OracleError::InvalidParams(format!(
            "need k <= N and t <= N, got N={n_pop}, k={k}, t={t}"
        )));
    }
    if t > 1000 {
        return Err(OracleError::TooLarge(format!("t = {t} draws, limit 1000")));
    }
    let p = k as f64 / n_pop.max(1) as f64;
    let mut acc = Kahan::default();
    let mut binom_tj = 1.0f64;
    for j in 0..=t {
        if j > 0 {
            binom_tj *= (t - j + 1) as f64 / j as f64;
        }
        let p_bin = binom_tj * p.powi(j as i32) * (1.0 - p).powi((t - j) as i32);
        let p_hyp = if j <= k && t - j <= n_pop - k {
            // C(k,j) C(N-k,t-j) / C(N,t) as an interleaved product of
            // ratios, so no intermediate value leaves f64 range.
            let mut v = binom_tj;
            for a in 0..j {
                v *= (k - a) as f64 / (n_pop - a) as f64;
            }
            for b in 0..(t - j) {
                v *= (n_pop - k - b) as f64 / (n_pop - j - b) as f64;
            }
            v
        } else {
            0.0
        };
        acc.add((p_bin - p_hyp).abs());
    }
    Ok(0.5 * acc.value())
}

/// Number of strings in `[n]^m`, the support of the perturbation law.
fn string_count(n: u32, m: u32) -> usize {
    (n as usize).pow(m)
}

fn decode_string(mut idx: usize, n: u32, m: u32) -> Vec<u32> {
    let mut s = vec![0u32; m as usize];
    for digit in s.iter_mut() {
        *digit = (idx % n as usize) as u32;
        idx /= n as usize;
    }
    s
}

fn encode_string(s: &[u32], n: u32) -> usize {
    s.iter()
        .rev()
        .fold(0usize, |acc, &d| acc * n as usize + d as usize)
}

/// All injective maps from a source of `src_len` elements into `targets`,
/// reported as the ordered target choice for each source index.
fn for_each_injection(src_len: usize, targets: &[u32], visit: &mut dyn FnMut(&[u32])) {
    fn go(
        src_len: usize,
        targets: &[u32],
        used: &mut Vec<bool>,
        chosen: &mut Vec<u32>,
        visit: &mut dyn FnMut(&[u32]),
    ) {
        if chosen.len() == src_len {
            visit(chosen);
            return;
        }
        for (i, &t) in targets.iter().enumerate() {
            if !used[i] {
                used[i] = true;
                chosen.push(t);
                go(src_len, targets, used, chosen, visit);
                chosen.pop();
                used[i] = false;
            }
        }
    }
    go(
        src_len,
        targets,
        &mut vec![false; targets.len()],
        &mut Vec::new(),
        visit,
    );
}

fn injection_count(src_len: usize, tgt_len: usize) -> f64 {
    (0..src_len).map(|i| (tgt_len - i) as f64).product()
}

/// Exact law of the set-difference perturbation for one fixed input string
/// y0 (given as a bit mask: bit i set means y0_i = 1), enumerating every
/// uniform sample y1 in `[n]^m` and every injection between the symmetric
/// difference sets. Entry `e` of the result is the probability of the
/// string whose digits d_0..d_{m-1} satisfy e = sum_i d_i * n^i.
pub fn perturb_difference_exact_law_given(
    n: u32,
    m: u32,
    y0_mask: u32,
) -> Result<Vec<f64>, OracleError> {
    if n == 0 || m == 0 {
        return Err(OracleError::InvalidParams(format!(
            "need n, m >= 1, got n={n}, m={m}"
        )));
    }
    if n > 4 || m > 4 {
        return Err(OracleError::TooLarge(format!("n={n}, m={m}, limit 4 each")));
    }
    if y0_mask >> n != 0 {
        return Err(OracleError::InvalidParams(format!(
            "y0 mask {y0_mask:#b} has bits past {n}"
        )));
    }
    let total = string_count(n, m);
    let mut law = vec![Kahan::default(); total];
    let s0: Vec<u32> = (0..n).filter(|&i| y0_mask >> i & 1 == 1).collect();
    for y1_idx in 0..total {
        let y1 = decode_string(y1_idx, n, m);
        let mut in_s1 = vec![false; n as usize];
        for &d in &y1 {
            in_s1[d as usize] = true;
        }
        let a: Vec<u32> = s0.iter().copied().filter(|&i| !in_s1[i as usize]).collect();
        let b: Vec<u32> = (0..n)
            .filter(|&i| in_s1[i as usize] && !s0.contains(&i))
            .collect();
        let y1_weight = 1.0 / total as f64;
        if a.len() >= b.len() {
            // Map each fresh symbol of y1 onto a distinct missing symbol of
            // y0, pulling the output support into S0.
            let share = y1_weight / injection_count(b.len(), a.len());
            for_each_injection(b.len(), &a, &mut |sigma| {
                let y: Vec<u32> = y1
                    .iter()
                    .map(|&d| match b.iter().position(|&x| x == d) {
                        Some(pos) => sigma[pos],
                        None => d,
                    })
                    .collect();
                law[encode_string(&y, n)].add(share);
            });
        } else {
            // Swap distinct fresh symbols of y1 out for the missing symbols
            // of y0, pushing the output support out to cover S0.
            let share = y1_weight / injection_count(a.len(), b.len());
            for_each_injection(a.len(), &b, &mut |tau| {
                let y: Vec<u32> = y1
                    .iter()
                    .map(|&d| match tau.iter().position(|&x| x == d) {
                        Some(pos) => a[pos],
                        None => d,
                    })
                    .collect();
                law[encode_string(&y, n)].add(share);
            });
        }
    }
    Ok(law.iter().map(Kahan::value).collect())
}

/// Exact output law of the set-difference perturbation under a uniformly
/// random input string, the setting in which the law is exactly uniform on
/// `[n]^m`. Averages the conditional law over all 2^n inputs.
pub fn perturb_difference_exact_law(n: u32, m: u32) -> Result<Vec<f64>, OracleError> {
    if n == 0 || m == 0 {
        return Err(OracleError::InvalidParams(format!(
            "need n, m >= 1, got n={n}, m={m}"
        )));
    }
    if n > 4 || m > 4 {
        return Err(OracleError::TooLarge(format!("n={n}, m={m}, limit 4 each")));
    }
    let total = string_count(n, m);
    let mut law = vec![Kahan::default(); total];
    let weight = 1.0 / f64::from(1u32 << n);
    for mask in 0..(1u32 << n) {
        let cond = perturb_difference_exact_law_given(n, m, mask)?;
        for (acc, p) in law.iter_mut().zip(cond) {
            acc.add(weight * p);
        }
    }
    Ok(law.iter().map(Kahan::value).collect())
}

/// Exact marginal distribution of the token produced by one embedding step,
/// averaged over the uniform codeword symbol. `p[tok]` is the model's next
/// token distribution, `phi[tok]` the code symbol each token maps to, and
/// `k_prc` the code alphabet size. The embedding lemma says this marginal
/// equals `p` itself; the enumeration here does not assume that.
pub fn exact_embed_marginal(p: &[f64], phi: &[u32], k_prc: u32) -> Result<Vec<f64>, OracleError> {
    if p.len() != phi.len() {
        return Err(OracleError::InvalidParams(format!(
            "distribution has {} tokens but phi maps {}",
            p.len(),
            phi.len()
        )));
    }
    if p.is_empty() || k_prc == 0 {
        return Err(OracleError::InvalidParams("empty alphabet".to_string()));
    }
    if p.len() > 8 || k_prc > 4 {
        return Err(OracleError::TooLarge(format!(
            "|alphabet| = {}, |code alphabet| = {k_prc}, limits 8 and 4",
            p.len()
        )));
    }
    if let Some(&bad) = phi.iter().find(|&&y| y >= k_prc) {
        return Err(OracleError::InvalidParams(format!(
            "phi value {bad} >= {k_prc}"
        )));
    }
    if p.iter().any(|&x| !(0.0..=1.0 + 1e-9).contains(&x)) {
        return Err(OracleError::InvalidParams(
            "probabilities outside [0, 1]".to_string(),
        ));
    }
    let mass: f64 = p.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(OracleError::InvalidParams(format!(
            "probabilities sum to {mass}"
        )));
    }

    let kf = f64::from(k_prc);
    let mut pushed = vec![Kahan::default(); k_prc as usize];
    for (tok, &y) in phi.iter().enumerate() {
        pushed[y as usize].add(p[tok]);
    }
    let pushed: Vec<f64> = pushed.iter().map(Kahan::value).collect();
    let residual: f64 = pushed.iter().map(|&w| (w - 1.0 / kf).max(0.0)).sum();

    let mut out = vec![Kahan::default(); p.len()];
    // Conditional token law given the embedded symbol y: p restricted to
    // phi^{-1}(y), renormalized by the pushforward mass.
    let add_conditional = |out: &mut [Kahan], y: u32, branch_weight: f64| {
        for (tok, &fy) in phi.iter().enumerate() {
            if fy == y {
                out[tok].add(branch_weight * p[tok] / pushed[y as usize]);
            }
        }
    };
    for x in 0..k_prc {
        let keep = (kf * pushed[x as usize]).min(1.0);
        if keep > 0.0 {
            add_conditional(&mut out, x, keep / kf);
        }
        let spill = 1.0 - keep;
        if spill > 0.0 && residual > 0.0 {
            for y in 0..k_prc {
                let excess = pushed[y as usize] - 1.0 / kf;
                if excess > 0.0 {
                    add_conditional(&mut out, y, spill / kf * excess / residual);
                }
            }
        }
    }
    Ok(out.iter().map(Kahan::value).collect())
}
