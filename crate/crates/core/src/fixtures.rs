//! Bundled test feeders.

use crate::error::Result;
use crate::network::{parse_case, Network};
use crate::scalar::Scalar;

/// 33-bus feeder with five normally-open tie switches.
pub const IEEE33: &str = include_str!("../cases/ieee33.json");
/// [`IEEE33`] with one distributed generator.
pub const IEEE33_DG: &str = include_str!("../cases/ieee33_case2.json");
/// [`IEEE33`] with two generators and a VAR compensator.
pub const IEEE33_DG_SVC: &str = include_str!("../cases/ieee33_case3.json");
/// 141-bus radial feeder.
pub const CASE141: &str = include_str!("../cases/case141.json");

pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "ieee33" => Some(IEEE33),
        "ieee33_case2" | "ieee33_dg" => Some(IEEE33_DG),
        "ieee33_case3" | "ieee33_dg_svc" => Some(IEEE33_DG_SVC),
        "case141" => Some(CASE141),
        _ => None,
    }
}

pub fn ieee33<T: Scalar>() -> Result<Network<T>> {
    parse_case(IEEE33)
}

pub fn case141<T: Scalar>() -> Result<Network<T>> {
    parse_case(CASE141)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cases_parse() {
        for name in ["ieee33", "ieee33_case2", "ieee33_case3", "case141"] {
            let net: Network<f64> = parse_case(by_name(name).unwrap()).unwrap();
            assert!(net.n_buses() == 33 || net.n_buses() == 141);
        }
        assert_eq!(ieee33::<f64>().unwrap().n_branches(), 37);
        assert_eq!(case141::<f64>().unwrap().n_branches(), 140);
    }
}
