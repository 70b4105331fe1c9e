//! Closed-form minimal sets against exhaustive subset search on templates.

use std::collections::BTreeSet;

use dswig_core::adjust::{
    build_template, enumerate_vas, table1, table_cell, Method, Pattern, Question, RestrictionSet,
    Target, TemplateSpec, VasFamily, TABLE_ROWS,
};

fn targets(periods: u32) -> impl Iterator<Item = Target> {
    (1..periods).flat_map(move |g| (0..periods).filter(move |&t| t + 1 != g).map(move |t| Target::new(g, t)))
}

#[test]
fn formula_agrees_with_search_up_to_five_periods() {
    for periods in 2..=5 {
        for r in RestrictionSet::enumerate() {
            let g = build_template(&TemplateSpec { periods, restrictions: r }).unwrap();
            for t in targets(periods) {
                let a = enumerate_vas(&g, &t, Some(&r)).unwrap();
                let b = enumerate_vas(&g, &t, None).unwrap();
                assert_eq!(
                    a.vas_family.sets(),
                    b.vas_family.sets(),
                    "T={periods} {} {t:?}",
                    r.to_flags()
                );
                if a.method == Method::Formula && a.feasible {
                    // no strictly smaller valid set
                    assert_eq!(b.minimal_witnesses, vec![a.minimal_observable.clone()]);
                }
            }
        }
    }
}

#[test]
fn not_yet_treated_uses_the_same_sets() {
    for periods in 3..=5 {
        for r in RestrictionSet::enumerate() {
            let g = build_template(&TemplateSpec { periods, restrictions: r }).unwrap();
            for t in targets(periods) {
                let nt = enumerate_vas(&g, &t, None).unwrap();
                for s in (t.g - 1).max(t.t)..periods {
                    let nyt = enumerate_vas(&g, &Target::nyt(t.g, t.t, s), None).unwrap();
                    assert_eq!(nt.minimal_witnesses, nyt.minimal_witnesses, "T={periods} {} {t:?} s={s}", r.to_flags());
                }
            }
        }
    }
}

#[test]
fn supersets_of_the_minimal_set_stay_valid() {
    for periods in 3..=5 {
        for r in RestrictionSet::enumerate().filter(RestrictionSet::formula_applies) {
            let g = build_template(&TemplateSpec { periods, restrictions: r }).unwrap();
            for t in targets(periods) {
                let a = enumerate_vas(&g, &t, Some(&r)).unwrap();
                if let VasFamily::Interval { lower, upper } = &a.vas_family {
                    let z: BTreeSet<String> = upper.iter().cloned().collect();
                    assert!(a.vas_family.contains(&z));
                    assert!(lower.iter().all(|l| upper.contains(l)));
                }
            }
        }
    }
}

fn expected() -> [[Pattern; 3]; 8] {
    use Pattern::*;
    [
        [None, None, None],
        [BarGm1, None, None],
        [BarGm1, BarG, None],
        [BarGm1, BarG, BarT],
        [PairTGm1, None, None],
        [PairTGm1, PairGm1G, None],
        [PairTGm1, PairGm1G, PairGm1T],
        [Empty, Empty, Empty],
    ]
}

#[test]
fn table_matches_for_three_to_six_periods() {
    for periods in 3..=6 {
        let tab = table1(periods).unwrap();
        for (row, want) in tab.rows.iter().zip(expected()) {
            for (cell, p) in row.cells.iter().zip(want) {
                assert!(cell.matches(p), "T={periods} {:?} {:?}: {}", row.flags, cell.question, cell.rendered);
            }
        }
    }
    let t4 = table1(4).unwrap();
    print!("{}", t4.to_text());
    // patterns are distinguishable from T = 4 on
    for row in &t4.rows {
        for c in &row.cells {
            assert_eq!(c.patterns.len(), 1, "{}", c.rendered);
        }
    }
}

#[test]
fn free_flags_do_not_matter() {
    for periods in 3..=5 {
        for (spec, want) in TABLE_ROWS.iter().zip(expected()) {
            for r in RestrictionSet::enumerate() {
                let pinned = (spec.alpha_y == r.formula_applies() || (!spec.alpha_y && !r.formula_applies()))
                    && spec.dx_t.map_or(true, |v| v == r.no_within_period_dx)
                    && spec.dx_t1.map_or(true, |v| v == r.no_dx_feedback)
                    && spec.xy_t1.map_or(true, |v| v == r.no_xy_dynamics)
                    && spec.xy_t.map_or(true, |v| v == r.no_within_period_xy);
                if !pinned {
                    continue;
                }
                for (q, p) in Question::ALL.into_iter().zip(want) {
                    let c = table_cell(periods, &r, q).unwrap();
                    assert!(c.matches(p), "T={periods} {} {q:?}: {}", r.to_flags(), c.rendered);
                }
            }
        }
    }
}
