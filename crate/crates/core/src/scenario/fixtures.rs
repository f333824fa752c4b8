//! Shipped scenario fixtures, embedded at build time.

pub static FIXTURES: &[(&str, &str)] = &[
    ("flat-lhpk", include_str!("../../scenarios/flat-lhpk.json")),
    (
        "flat-pqk-rotated",
        include_str!("../../scenarios/flat-pqk-rotated.json"),
    ),
    (
        "conformal-nonflat",
        include_str!("../../scenarios/conformal-nonflat.json"),
    ),
    (
        "product-8d",
        include_str!("../../scenarios/product-8d.json"),
    ),
    (
        "product-8d-rotating-f",
        include_str!("../../scenarios/product-8d-rotating-f.json"),
    ),
    (
        "product-submersion-rotated",
        include_str!("../../scenarios/product-submersion-rotated.json"),
    ),
    (
        "product-submersion-fiber-rotated",
        include_str!("../../scenarios/product-submersion-fiber-rotated.json"),
    ),
    (
        "sasaki-over-flat",
        include_str!("../../scenarios/sasaki-over-flat.json"),
    ),
    (
        "sasaki-over-rotated",
        include_str!("../../scenarios/sasaki-over-rotated.json"),
    ),
    (
        "sasaki-over-conformal",
        include_str!("../../scenarios/sasaki-over-conformal.json"),
    ),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn fixture_names() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(n, _)| *n)
}
