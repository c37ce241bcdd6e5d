//! Exhaustive verification of the dyadic block lemmas for one dataset size.
//!
//! Block membership is materialized as per-row owner tables and K0-block sets
//! as bitsets, so every property is checked by explicit set operations rather
//! than through the interval arithmetic used by the selection path.

use std::fmt;

use super::{eligible_k0_blocks, k0_level, max_level, BlockId, ComparisonLayout, MIN_LEVEL};

/// Outcome of one property over all its instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub instances: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

impl LemmaCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            instances: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub n: usize,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(LemmaCheck::passed)
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "N={:<6} {:<28} {:>10} instances  {}",
                self.n,
                c.name,
                c.instances,
                if c.passed() { "PASS" } else { "FAIL" }
            )?;
            if let Some(d) = &c.first_failure {
                write!(f, "  ({d})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// owner[i] = 1-based block index containing 0-based row `i` at `level`.
fn owners(n: usize, level: u32) -> Vec<usize> {
    let mut owner = vec![0usize; n];
    for b in BlockId::level_blocks(level) {
        for i in super::block_indices(n, b).expect("valid level") {
            owner[i - 1] = b.index;
        }
    }
    owner
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn union_count(&self, other: &Bits) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }
    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
}

/// Pair cross-checks against [`eligible_k0_blocks`] are exhaustive up to this
/// many (pair, K0-block) visits per K0 level, and restricted to low training
/// levels beyond it.
const CROSS_CHECK_BUDGET: usize = 4_000_000;

/// Runs the partition, nesting, refinement, cardinality, eligibility and
/// comparison-block size checks for dataset size `n >= 8`.
pub fn verify_partition_lemmas(n: usize) -> LemmaReport {
    assert!(n >= 8, "dataset size must be at least 8");
    let top = max_level(n);
    let levels: Vec<u32> = (MIN_LEVEL..=top).collect();
    let owner: Vec<Vec<usize>> = levels.iter().map(|&l| owners(n, l)).collect();
    let owner_at = |level: u32| &owner[(level - MIN_LEVEL) as usize];

    let mut partition = LemmaCheck::new("partition of [N]");
    let mut cardinality = LemmaCheck::new("training block <= N/4");
    for &level in &levels {
        let mut seen = vec![0u32; n];
        let mut sizes = vec![0usize; 1 << level];
        for b in BlockId::level_blocks(level) {
            for i in super::block_indices(n, b).expect("valid level") {
                seen[i - 1] += 1;
                sizes[b.index - 1] += 1;
            }
        }
        partition.record(seen.iter().all(|&c| c == 1), || {
            format!("level {level}: rows not covered exactly once")
        });
        for (k, &s) in sizes.iter().enumerate() {
            cardinality.record(4 * s <= n && s > 0, || {
                format!("level {level} block {} has {s} rows", k + 1)
            });
        }
    }

    let mut nesting = LemmaCheck::new("nesting (coarse parent)");
    let mut refinement = LemmaCheck::new("refinement (children)");
    for &coarse in &levels {
        for &fine in levels.iter().filter(|&&l| l >= coarse) {
            let shift = fine - coarse;
            let oc = owner_at(coarse);
            let of = owner_at(fine);
            for b in BlockId::level_blocks(fine) {
                let parent = ((b.index - 1) >> shift) + 1;
                let ok = (0..n)
                    .filter(|&i| of[i] == b.index)
                    .all(|i| oc[i] == parent);
                nesting.record(ok, || {
                    format!("B[{}]^({fine}) not inside B[{parent}]^({coarse})", b.index)
                });
            }
            for parent in BlockId::level_blocks(coarse) {
                let lo = (parent.index - 1) << shift;
                let hi = parent.index << shift;
                let ok = (0..n).all(|i| (oc[i] == parent.index) == (of[i] > lo && of[i] <= hi));
                refinement.record(ok, || {
                    format!(
                        "children of B[{}]^({coarse}) at level {fine} do not partition it",
                        parent.index
                    )
                });
            }
        }
    }

    let mut eligibility = LemmaCheck::new("eligible count >= V");
    let mut three_quarters = LemmaCheck::new("eligible count >= 3/4 2^K0");
    let mut level_bound = LemmaCheck::new("2^K0 <= 8V/3");
    let mut size_bound = LemmaCheck::new("comparison block >= N/(4V)");
    let mut cross = LemmaCheck::new("eligible set matches impl");

    let all_blocks: Vec<BlockId> = levels
        .iter()
        .flat_map(|&l| BlockId::level_blocks(l))
        .collect();

    let v_max = n / 8;
    let mut v = 3;
    while v <= v_max {
        let k0 = k0_level(v).expect("V >= 3");
        // Every V sharing this K0 has the same eligible sets.
        let mut v_hi = v;
        while v_hi < v_max && k0_level(v_hi + 1).expect("V >= 3") == k0 {
            v_hi += 1;
        }
        let count = 1usize << k0;
        let o0 = owner_at(k0);

        let touched: Vec<Bits> = all_blocks
            .iter()
            .map(|b| {
                let mut bits = Bits::new(count);
                let ob = owner_at(b.level);
                for i in (0..n).filter(|&i| ob[i] == b.index) {
                    bits.set(o0[i] - 1);
                }
                bits
            })
            .collect();

        let mut min_eligible = usize::MAX;
        let mut worst = (all_blocks[0], all_blocks[0]);
        for (a, ta) in touched.iter().enumerate() {
            for (b, tb) in touched.iter().enumerate().skip(a) {
                let e = count - ta.union_count(tb);
                if e < min_eligible {
                    min_eligible = e;
                    worst = (all_blocks[a], all_blocks[b]);
                }
            }
        }

        let pairs = all_blocks.len() * (all_blocks.len() + 1) / 2;
        let cross_level = if pairs * count <= CROSS_CHECK_BUDGET {
            top
        } else {
            top.min(MIN_LEVEL + 2)
        };

        let mut k0_sizes: Vec<usize> = vec![0; count];
        for &o in o0 {
            k0_sizes[o - 1] += 1;
        }
        let min_size = *k0_sizes.iter().min().expect("nonempty partition");

        for vv in v..=v_hi {
            eligibility.record(min_eligible >= vv, || {
                format!("V={vv}: pair {} {} leaves {min_eligible}", worst.0, worst.1)
            });
            three_quarters.record(4 * min_eligible >= 3 * count, || {
                format!("K0={k0}: min eligible {min_eligible} of {count}")
            });
            level_bound.record(3 * count <= 8 * vv, || format!("V={vv}: 2^K0 = {count}"));
            size_bound.record(4 * vv * min_size >= n, || {
                format!("V={vv}: smallest K0-block has {min_size} rows")
            });
        }

        let layout = ComparisonLayout::new(v, n).expect("3 <= V <= N/8");
        for (a, ba) in all_blocks.iter().enumerate() {
            if ba.level > cross_level {
                continue;
            }
            for (b, bb) in all_blocks.iter().enumerate().skip(a) {
                if bb.level > cross_level {
                    continue;
                }
                let expected: Vec<usize> = (0..count)
                    .filter(|&k| !touched[a].contains(k) && !touched[b].contains(k))
                    .map(|k| k + 1)
                    .collect();
                let got = eligible_k0_blocks(*ba, *bb, &layout);
                cross.record(got.as_ref().ok() == Some(&expected), || {
                    format!("V={v}: {ba} {bb}")
                });
            }
        }
        v = v_hi + 1;
    }

    LemmaReport {
        n,
        checks: vec![
            partition,
            cardinality,
            nesting,
            refinement,
            eligibility,
            three_quarters,
            level_bound,
            size_bound,
            cross,
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sizes_pass() {
        for n in [8, 9, 17, 64, 100] {
            let report = verify_partition_lemmas(n);
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn n8_has_no_v_range() {
        let report = verify_partition_lemmas(8);
        let e = report
            .checks
            .iter()
            .find(|c| c.name.starts_with("eligible count >= V"))
            .unwrap();
        assert_eq!(e.instances, 0);
    }
}
