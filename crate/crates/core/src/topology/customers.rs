//! Customer estimation per line section.
//!
//! The Loads table only stores per-phase counts, not customer identities, so
//! the union of the per-phase customer sets is realised as the sum of the
//! three phase counts. The result is an approximation and is reported as such.

use super::records::LoadRecord;

/// Estimated number of customers connected to `section_id`.
///
/// Sums every phase count of every load record citing the section. A section
/// with no load records has zero customers.
pub fn estimate_customers(loads: &[LoadRecord], section_id: &str) -> u32 {
    loads
        .iter()
        .filter(|l| l.section_id == section_id)
        .flat_map(|l| l.customers_per_phase.values())
        .sum()
}
