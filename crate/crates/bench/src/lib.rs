//! Inputs shared by the criterion benches.

use simtmeld::corpus::KERNELS;
use simtmeld::ir::{Function, Module};
use simtmeld::sim::Fixture;

/// A corpus kernel, parsed, with its first function and a fixed fixture.
pub struct Case {
    pub name: &'static str,
    pub source: &'static str,
    pub module: Module,
    pub fixture: Fixture,
}

impl Case {
    pub fn function(&self) -> &Function {
        &self.module.functions[0]
    }
}

/// Every corpus kernel the pass accepts, prepared for a warp of `warp_size`.
pub fn cases(warp_size: usize) -> Vec<Case> {
    KERNELS
        .iter()
        .filter(|k| k.name != "multi_ret")
        .map(|k| {
            let module = k.module().expect("corpus parses");
            let fixture = Fixture::random(&module, &module.functions[0], warp_size, 1);
            Case {
                name: k.name,
                source: k.source,
                module,
                fixture,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn cases_are_prepared() {
        let cs = super::cases(8);
        assert_eq!(cs.len(), 15);
        assert!(cs.iter().all(|c| !c.function().blocks.is_empty()));
    }
}
