//! Symbol families: values, λ-derivatives, square roots and class diagnostics.

use fracsob::symbol::{class_report, eval_symbol, sqrt_symbol, symbol_lambda_derivative};
use fracsob::LambdaSymbol;

fn main() -> fracsob::Result<()> {
    let symbols = [
        ("H^1 constant", LambdaSymbol::constant_coefficient(vec![1.0, 1.0], 2)?),
        ("H^1 scale-invariant", LambdaSymbol::scale_invariant(vec![1.0, 1.0], 2)?),
        ("Bessel r = 0.8", LambdaSymbol::bessel(0.8, 1.0, 2)?),
        ("Bessel r = 1.5", LambdaSymbol::bessel(1.5, 1.0, 2)?),
        ("two-term r = 1.25", LambdaSymbol::two_term(1.25, 1.0, 1.0, 2)?),
    ];
    let lambda = 2.0;
    for (name, s) in &symbols {
        println!("{name}:");
        for m in [0i64, 1, 4, 16] {
            let a = eval_symbol(s, lambda, m)?[(0, 0)];
            let da = symbol_lambda_derivative(s, lambda, m).map(|x| x[(0, 0)]);
            let b = sqrt_symbol(s, lambda, m)?[(0, 0)];
            println!("  m = {m:>2}: a = {a:<12.6e} ∂λa = {:<14} √a = {b:.6e}", da.map_or("-".into(), |x| format!("{x:.6e}")));
        }
        let r = class_report(s, (0.5, 10.0), 8, 256, 2)?;
        println!("  class: positive {}, elliptic {} (margin {:.3e}), seminorms {:.3?}", r.positive, r.elliptic, r.ellipticity_margin, r.seminorms);
    }
    Ok(())
}
