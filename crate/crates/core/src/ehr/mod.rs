//! EHR table preparation: sparse-column exclusion and iterative
//! random-forest imputation.

mod impute;
mod table;

pub use impute::{
    audit_columns, drop_sparse_columns, rf_impute, ColumnAudit, DEFAULT_DROP_THRESHOLD, DEFAULT_ITERATIONS,
};
pub use table::{ColumnData, EhrColumn, EhrTable};
