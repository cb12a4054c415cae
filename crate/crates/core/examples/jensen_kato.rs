//! Scalar model of the threshold contribution: |∫ e^{-iωt}F(ω) dω| for a √ω edge and a smooth
//! control.

use magdecay::decay::log_times;
use magdecay::propagator::{jensen_kato_oracle, JkKind};

fn main() -> magdecay::Result<()> {
    let t = log_times(10.0, 1e3, 12)?;
    for kind in [JkKind::SqrtBump, JkKind::SmoothBump] {
        let r = jensen_kato_oracle(kind, 1.0, &t)?;
        println!("{kind:?}: exponent {:?}", r.exponent);
    }
    Ok(())
}
