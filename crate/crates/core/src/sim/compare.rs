use serde::Serialize;

use super::ExecResult;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub equal: bool,
    /// First difference found, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diff: Option<String>,
}

impl Verdict {
    fn differs(msg: String) -> Verdict {
        Verdict {
            equal: false,
            diff: Some(msg),
        }
    }
}

/// Two runs agree when every lane has the same outcome, final global memory is
/// identical, and neither run let an `undef`-derived value become observable.
pub fn compare_runs(a: &ExecResult, b: &ExecResult) -> Verdict {
    for (name, r) in [("first", a), ("second", b)] {
        if let Some(v) = r.taint_violations.first() {
            return Verdict::differs(format!(
                "{name} run: undef reaches a {} in ^{} on lane {}",
                v.site, v.block, v.lane
            ));
        }
    }
    if a.lanes.len() != b.lanes.len() {
        return Verdict::differs(format!(
            "warp sizes differ: {} vs {}",
            a.lanes.len(),
            b.lanes.len()
        ));
    }
    for (lane, (x, y)) in a.lanes.iter().zip(&b.lanes).enumerate() {
        if x.observable() != y.observable() {
            return Verdict::differs(format!("lane {lane}: {x:?} vs {y:?}"));
        }
    }
    for (name, xs) in &a.global {
        let Some(ys) = b.global.get(name) else {
            return Verdict::differs(format!("global {name} missing from second run"));
        };
        if let Some(i) = (0..xs.len().max(ys.len())).find(|&i| xs.get(i) != ys.get(i)) {
            return Verdict::differs(format!(
                "global {name}[{i}]: {:?} vs {:?}",
                xs.get(i),
                ys.get(i)
            ));
        }
    }
    if let Some(name) = b.global.keys().find(|k| !a.global.contains_key(*k)) {
        return Verdict::differs(format!("global {name} missing from first run"));
    }
    Verdict {
        equal: true,
        diff: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;
    use crate::sim::{execute_warp, Fixture, SimConfig};

    #[test]
    fn self_equal_and_localized_diff() {
        let src = "global out[4]\nfn f() {\n^e:\n %t = tid\n %v = mul %t 3\n store.global out %t %v\n ret %v\n}";
        let m = parse_module(src).unwrap();
        let cfg = SimConfig::with_warp_size(4);
        let a = execute_warp(&m, &m.functions[0], &Fixture::default(), &cfg).unwrap();
        assert!(compare_runs(&a, &a).equal);

        let m2 = parse_module(&src.replace("mul %t 3", "mul %t 2")).unwrap();
        let b = execute_warp(&m2, &m2.functions[0], &Fixture::default(), &cfg).unwrap();
        let v = compare_runs(&a, &b);
        assert!(!v.equal);
        assert!(v.diff.unwrap().starts_with("lane 1"));
    }
}
