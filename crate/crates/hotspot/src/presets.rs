//! Built-in parameter sets, stored as TOML so they layer like user files.

pub const NAMES: [&str; 6] = [
    "case1",
    "case2",
    "case3",
    "case2-piecewise-eta",
    "highway-square",
    "chicago-like",
];

const TEXTS: [&str; 6] = [
    include_str!("../presets/case1.toml"),
    include_str!("../presets/case2.toml"),
    include_str!("../presets/case3.toml"),
    include_str!("../presets/case2-piecewise-eta.toml"),
    include_str!("../presets/highway-square.toml"),
    include_str!("../presets/chicago-like.toml"),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    NAMES.iter().position(|n| *n == name).map(|i| TEXTS[i])
}
