//! The benchmark kernels shipped with the crate.

use crate::ir::{parse_module, Module, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kernel {
    pub name: &'static str,
    pub source: &'static str,
    /// Whether the default pass is expected to meld something.
    pub positive: bool,
    /// Expected outcome of branch-fusion mode, for the synthetic kernels.
    pub fusion: Option<bool>,
}

impl Kernel {
    pub fn module(&self) -> Result<Module, ParseError> {
        parse_module(self.source)
    }
}

macro_rules! kernel {
    ($name:literal, $path:literal, $positive:expr, $fusion:expr) => {
        Kernel {
            name: $name,
            source: include_str!(concat!("../../../corpus/", $path)),
            positive: $positive,
            fusion: $fusion,
        }
    };
}

pub const KERNELS: &[Kernel] = &[
    kernel!("sb1", "sb1.ir", true, Some(true)),
    kernel!("sb2", "sb2.ir", true, Some(false)),
    kernel!("sb3", "sb3.ir", true, Some(false)),
    kernel!("sb4", "sb4.ir", true, Some(true)),
    kernel!("sb1r", "sb1r.ir", true, Some(true)),
    kernel!("sb2r", "sb2r.ir", true, Some(false)),
    kernel!("sb3r", "sb3r.ir", true, Some(false)),
    kernel!("sb4r", "sb4r.ir", true, Some(true)),
    kernel!("bitonic", "bitonic.ir", true, None),
    kernel!("loop_arms", "loop_arms.ir", true, None),
    kernel!("uniform", "negative/uniform.ir", false, None),
    kernel!("if_then", "negative/if_then.ir", false, None),
    kernel!("multi_ret", "negative/multi_ret.ir", false, None),
    kernel!("barrier_arm", "negative/barrier_arm.ir", false, None),
    kernel!("empty_arms", "negative/empty_arms.ir", false, None),
    kernel!("nested_loops", "negative/nested_loops.ir", false, None),
];

pub fn kernel(name: &str) -> Option<&'static Kernel> {
    KERNELS.iter().find(|k| k.name == name)
}

pub fn positive() -> impl Iterator<Item = &'static Kernel> {
    KERNELS.iter().filter(|k| k.positive)
}

pub fn negative() -> impl Iterator<Item = &'static Kernel> {
    KERNELS.iter().filter(|k| !k.positive)
}
