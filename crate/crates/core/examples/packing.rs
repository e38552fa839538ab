// Certified support and sign packings and the hypothesis classes built on them.

use nestrec::minimax::{
    build_hypothesis_col, build_hypothesis_row, build_sign_packing, build_support_packing, SIGN_MIN_FRACTION,
    SIGN_TARGET_RATE,
};
use nestrec::ProblemDims;

pub fn run_example() -> nestrec::Result<()> {
    let dims = ProblemDims::with_default_rules(100, 10, 8, 2)?;
    let supports = build_support_packing(dims.p1, dims.k, 1)?;
    let row_signs = build_sign_packing(dims.r, dims.p2, SIGN_MIN_FRACTION, SIGN_TARGET_RATE, 2)?;
    let col_signs = build_sign_packing(dims.k, dims.r, SIGN_MIN_FRACTION, SIGN_TARGET_RATE, 3)?;
    for (name, set) in [
        ("supports", &supports),
        ("row signs", &row_signs),
        ("col signs", &col_signs),
    ] {
        set.verify()?;
        println!("{name:<10} {:>4} members, min distance {}", set.len(), set.min_distance);
    }
    // a small corner of each class, checked exhaustively
    let few = |s: &nestrec::minimax::PackingSet, n: usize| nestrec::minimax::PackingSet {
        members: s.members.iter().take(n).cloned().collect(),
        ..s.clone()
    };
    let eps = 0.1;
    let rows = build_hypothesis_row(&dims, eps, &few(&supports, 6), &few(&row_signs, 4))?;
    let cols = build_hypothesis_col(&dims, eps, &few(&supports, 6), &few(&col_signs, 4))?;
    for set in [&rows, &cols] {
        set.verify_membership()?;
        set.verify_separation(None)?;
        println!(
            "{:?}: {} members, all at norm {eps} and pairwise >= {}",
            set.kind,
            set.len(),
            eps / 2.0
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
