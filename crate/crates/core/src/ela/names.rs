//! Canonical feature names in fixed order. The order here is the order of
//! every feature vector, CSV emission, and tie-break in rankings.

pub const FEATURE_COUNT: usize = 46;

const NAMES: [&str; FEATURE_COUNT] = [
    // y-distribution (3)
    "ela_distr.skewness",
    "ela_distr.kurtosis",
    "ela_distr.number_of_peaks",
    // meta model (9)
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_simple.cond",
    "ela_meta.quad_w_interact.adj_r2",
    // dispersion (16)
    "disp.ratio_mean_02",
    "disp.ratio_mean_05",
    "disp.ratio_mean_10",
    "disp.ratio_mean_25",
    "disp.ratio_median_02",
    "disp.ratio_median_05",
    "disp.ratio_median_10",
    "disp.ratio_median_25",
    "disp.diff_mean_02",
    "disp.diff_mean_05",
    "disp.diff_mean_10",
    "disp.diff_mean_25",
    "disp.diff_median_02",
    "disp.diff_median_05",
    "disp.diff_median_10",
    "disp.diff_median_25",
    // information content (5)
    "ic.h.max",
    "ic.eps.s",
    "ic.eps.max",
    "ic.eps.ratio",
    "ic.m0",
    // nearest better clustering (5)
    "nbc.nn_nb.sd_ratio",
    "nbc.nn_nb.mean_ratio",
    "nbc.nn_nb.cor",
    "nbc.dist_ratio.coeff_var",
    "nbc.nb_fitness.cor",
    // principal component analysis (8)
    "pca.expl_var.cov_x",
    "pca.expl_var.cor_x",
    "pca.expl_var.cov_init",
    "pca.expl_var.cor_init",
    "pca.expl_var_PC1.cov_x",
    "pca.expl_var_PC1.cor_x",
    "pca.expl_var_PC1.cov_init",
    "pca.expl_var_PC1.cor_init",
];

pub fn feature_names() -> &'static [&'static str; FEATURE_COUNT] {
    &NAMES
}

pub fn feature_index(name: &str) -> Option<usize> {
    NAMES.iter().position(|&n| n == name)
}
