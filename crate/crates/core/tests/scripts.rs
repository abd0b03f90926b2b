//! End-to-end runs of small scripts through the library driver.

use boundcert::certificate::check;
use boundcert::cli::{prove_source, Run, RunConfig};
use boundcert::dyadic::{parse_dyadic, Dyadic};
use boundcert::interval::Interval;

fn prove(src: &str) -> Run {
    let r = prove_source(src, &RunConfig::default()).unwrap();
    if r.proved {
        check(r.certificate.as_ref().unwrap()).unwrap();
    }
    r
}

fn answer(r: &Run, name: &str) -> Interval {
    r.answers
        .iter()
        .find(|a| a.1 == name)
        .unwrap_or_else(|| panic!("no answer for {name}: {}", r.report))
        .2
        .clone()
}

fn d(s: &str) -> Dyadic {
    parse_dyadic(s).unwrap()
}

#[test]
fn floor_of_an_approximation() {
    let r = prove("@floor = int<dn>;\n{ x - y in [-0.1,0.1] -> floor(x) - y in ? }\n");
    assert!(r.proved);
    let i = answer(&r, "floor(x) - y");
    assert!(i.lo().to_f64() >= -1.1 - 1e-12 && i.lo().to_f64() < -1.09, "{i}");
    assert!(i.hi().to_f64() <= 0.1 + 1e-12 && i.hi().to_f64() > 0.09, "{i}");
    assert!(r.warnings.is_empty());
}

#[test]
fn redundant_approximation_hint_is_reported() {
    let r = prove("@floor = int<dn>;\n{ x - y in [-0.1,0.1] -> floor(x) - y in ? }\nx ~ y;\n");
    assert!(r.proved);
    assert!(r.warnings.iter().any(|w| w.contains("useless")), "{:?}", r.warnings);
}

#[test]
fn newton_iteration_with_a_user_rule() {
    let r = prove(
        "{ y in [1,2] /\\ x - 1/y in [-1b-10,1b-10] -> x * (2 - x * y) - 1/y in ? }\n\
         x * (2 - x * y) - 1/y -> (x - 1/y) * (x - 1/y) * -y;\n",
    );
    assert!(r.proved);
    assert_eq!(
        answer(&r, "x * (2 - x * y) - 1 / y"),
        Interval::new(d("-1b-19"), Dyadic::zero())
    );
    let cert = r.certificate.unwrap();
    assert_eq!(cert.hints.len(), 1);
    assert!(cert.hints[0].ring);
    assert_eq!(check(&cert).unwrap().assumed, 0);
}

#[test]
fn unequal_user_rule_is_assumed() {
    let r = prove("{ x in [1,2] -> x * x in ? }\nx * x -> x * x + 1b-30;\n");
    assert!(r.proved);
    assert!(
        r.warnings.iter().any(|w| w.contains("not provably equal")),
        "{:?}",
        r.warnings
    );
    let cert = r.certificate.unwrap();
    assert!(!cert.hints[0].ring);
    let report = check(&cert).unwrap();
    assert_eq!(report.assumed, 1);
    assert!(report.to_string().ends_with("modulo 1 assumed identity"), "{report}");
}

#[test]
fn rounded_alias_forms_agree() {
    let r = prove(
        "@rnd = float< ieee_32, ne>;\ny = rnd(x * rnd(1 - x));\nz rnd= x * (1 - x);\n\
         { x in [0,1] -> y in ? /\\ z - x * (1 - x) in ? }\n",
    );
    assert!(r.proved);
    assert!(r.warnings.iter().any(|w| w.contains("two names")), "{:?}", r.warnings);
    assert_eq!(answer(&r, "y"), Interval::new(Dyadic::zero(), Dyadic::one()));
    assert_eq!(answer(&r, "y - x * (1 - x)"), Interval::new(d("-1b-24"), d("1b-24")));
}

#[test]
fn trivially_zero_divisor_is_reported() {
    let r = prove("{ x in [0,1] -> x in ? }\nx -> x * (y - y) / (y - y);\n");
    assert!(
        r.warnings.iter().any(|w| w.contains("trivially zero")),
        "{:?}",
        r.warnings
    );
}

#[test]
fn relative_error_operators() {
    let r = prove(
        "{ x in [1,2] /\\ y in [1,2] -> add_rel<20>(x, y) - (x + y) in ? /\\ \
         (mul_rel<30,-100>(x, y) - x * y) / (x * y) in ? }",
    );
    assert!(r.proved);
    assert_eq!(
        answer(&r, "add_rel<20>(x, y) - (x + y)"),
        Interval::new(d("-1b-18"), d("1b-18"))
    );
    assert_eq!(
        answer(&r, "(mul_rel<30,-100>(x, y) - x * y) / (x * y)"),
        Interval::new(d("-1b-30"), d("1b-30"))
    );
}

#[test]
fn even_bisection_of_a_double_precision_square() {
    let r =
        prove("@rnd = float<ieee_64, ne>;\n{ x in [0,3] -> rnd(x) * rnd(x) - x * x in [-1b-48, 1b-48] }\n$ x in 6;\n");
    assert!(r.proved);
}

#[test]
fn one_sided_goal_and_negation() {
    let r = prove("{ x in [1,2] -> not x * x <= 0.5 }");
    assert!(r.proved, "{}", r.report);
    let r = prove("{ x in [-1,2] -> |x| <= 2 /\\ x * x >= 0 }");
    assert!(r.proved, "{}", r.report);
}

#[test]
fn query_in_hypothesis_is_an_input_error() {
    assert!(prove_source("{ x in ? -> x in [0,1] }", &RunConfig::default()).is_err());
}

#[test]
fn fused_multiply_add_and_square_root() {
    let r = prove("{ a in [1,2] /\\ b in [-1,1] /\\ c in [0,4] -> fma(a, b, sqrt(c)) in ? }");
    assert!(r.proved);
    assert_eq!(answer(&r, "fma(a, b, sqrt(c))"), Interval::new(d("-1b1"), d("1b2")));
}
