//! Writes the synthetic FICO-like marginals table shipped in `data/`.
//!
//! ```text
//! cargo run -p fairpost --example synthetic_fico > crates/core/data/synthetic_fico_marginals.csv
//! ```
//!
//! The numbers are invented. They only mimic the shape of credit-score
//! data: scores on 300..=850, groups with shifted score distributions and
//! a common non-default curve.

fn main() -> Result<(), fairpost::Error> {
    print!("{}", fairpost::casestudy::synthetic_marginals().to_csv()?);
    Ok(())
}
