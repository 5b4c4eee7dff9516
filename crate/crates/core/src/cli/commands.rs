//! The computations behind each subcommand, returned as figure bundles.

use crate::array_model::SphericalPosition;
use crate::beamdepth::{
    depth_limits_at, fit_table, verify_depth_limits, DepthError, DepthFitModel, UpperLimit, XDeltaTable, XSource,
    DEFAULT_BREAKPOINT,
};
use crate::gain::{relative_gain_oracle, relative_gain_single_kernel, relative_gain_two_kernel, w_param, GainError};

use super::config::{RunConfig, XSourceKind};
use super::output::{Cell, FigureBundle, Table};
use super::CliError;

const TOOL: &str = env!("CARGO_PKG_NAME");
const VERSION: &str = env!("CARGO_PKG_VERSION");

fn manifest(cfg: &RunConfig, command: &str, figure: Option<u8>) -> Vec<(String, String)> {
    let mut pairs = vec![
        ("tool".to_owned(), TOOL.to_owned()),
        ("version".to_owned(), VERSION.to_owned()),
        ("command".to_owned(), command.to_owned()),
    ];
    if let Some(f) = figure {
        pairs.push(("figure".to_owned(), f.to_string()));
    }
    pairs.extend(cfg.to_pairs().into_iter().filter(|(k, _)| k != "outdir"));
    pairs
}

fn gain_error(e: GainError) -> CliError {
    match e {
        GainError::InvalidMismatch { .. } | GainError::Model(_) => CliError::Config(e.to_string()),
    }
}

/// Relative gain against range mismatch for each attenuation coefficient.
pub fn gain_curve(cfg: &RunConfig, name: &str, figure: Option<u8>) -> Result<FigureBundle, CliError> {
    let mut table = Table::new(
        "gain",
        "relative beamforming gain with the beam focused at r + dr",
        &[
            ("alpha", "microstrip attenuation coefficient [1/m]"),
            ("w", "half-aperture attenuation exponent 0.5 N_e d_e alpha"),
            ("dr", "range mismatch [m]"),
            ("oracle", "brute-force relative gain"),
            ("two_kernel", "two-kernel approximation eta^-2 K^2 D^2"),
            ("single_kernel", "single-kernel approximation eta^-2 K^2"),
            ("single_kernel_valid", "1 when t_y <= 0.46"),
        ],
    );
    let user = cfg.user;
    for &alpha in &cfg.alpha_list {
        let array = cfg
            .array
            .with_alpha(alpha)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let w = w_param(&array);
        for dr in cfg.dr.points() {
            let l2 = relative_gain_single_kernel(&array, &user, dr).map_err(gain_error)?;
            let l1 = relative_gain_two_kernel(&array, &user, dr).map_err(gain_error)?;
            let focus = user
                .with_range(user.r + dr)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let oracle = relative_gain_oracle(&array, &user, &focus, cfg.mode);
            table.push(vec![
                alpha.into(),
                w.into(),
                dr.into(),
                oracle.into(),
                l1.into(),
                l2.value.into(),
                Cell::Flag(l2.valid),
            ]);
        }
    }
    let mut plot = String::from(
        "set datafile separator ','\nset xlabel 'range mismatch dr [m]'\nset ylabel 'relative gain'\nset yrange [0:1.05]\nset key top right\nplot \\\n",
    );
    let series: Vec<String> = cfg
        .alpha_list
        .iter()
        .enumerate()
        .flat_map(|(i, &alpha)| {
            let a = format!("{alpha:?}");
            [
                format!(
                    "  '{name}.csv' using 3:($1=={a} ? $4 : 1/0) with points pt 3 lc {i} title 'alpha={a} numeric'"
                ),
                format!("  '{name}.csv' using 3:($1=={a} ? $6 : 1/0) with lines lc {i} title 'alpha={a} analytic'"),
            ]
        })
        .collect();
    plot.push_str(&series.join(", \\\n"));
    plot.push('\n');
    Ok(FigureBundle {
        name: name.to_owned(),
        tables: vec![table],
        plot,
        manifest: manifest(cfg, "gain-curve", figure),
    })
}

fn depth_error(e: DepthError) -> CliError {
    match e {
        DepthError::NoRootInBracket { .. } | DepthError::UndefinedBeamDepth | DepthError::SingularFit { .. } => {
            CliError::Numerical(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

fn mse_table(table: &XDeltaTable, published: &DepthFitModel, refit: Option<&DepthFitModel>) -> Table {
    let mut mse = Table::new(
        "mse",
        "per-delta mean squared error of the piecewise-linear model over the w grid",
        &[
            ("delta", "gain fraction"),
            ("mse_published", "MSE of the published coefficients"),
            ("mse_refit", "MSE of the least-squares refit (nan without refit)"),
            ("crossing_published", "w where b0 + b1 w = 0, published coefficients"),
            ("crossing_refit", "w where b0 + b1 w = 0, refit"),
            (
                "jump_published",
                "branch mismatch at the breakpoint, published coefficients",
            ),
            ("jump_refit", "branch mismatch at the breakpoint, refit"),
        ],
    );
    let pub_mse = table.mse(published);
    let fit_mse = refit.map(|m| table.mse(m));
    for (d, &delta) in table.delta_grid.iter().enumerate() {
        mse.push(vec![
            delta.into(),
            pub_mse[d].into(),
            fit_mse.as_ref().map(|v| v[d]).into(),
            published.crossing(delta).into(),
            refit.map(|m| m.crossing(delta)).into(),
            published.continuity_residual(delta).into(),
            refit.map(|m| m.continuity_residual(delta)).into(),
        ]);
    }
    mse
}

/// Numerically solved `x_delta(w)` next to the piecewise-linear model.
pub fn xdelta(cfg: &RunConfig, name: &str, figure: Option<u8>) -> Result<FigureBundle, CliError> {
    let solved = XDeltaTable::solve(&cfg.w.points(), &cfg.delta_list).map_err(depth_error)?;
    let published = DepthFitModel::published();
    let refit = if cfg.fit {
        Some(fit_table(&solved, DEFAULT_BREAKPOINT).map_err(depth_error)?)
    } else {
        None
    };
    let mut main = Table::new(
        "xdelta",
        "mismatch coordinate where K^2 falls to delta times its peak",
        &[
            ("delta", "gain fraction"),
            ("w", "half-aperture attenuation exponent"),
            ("x_numeric", "numerically solved x_delta(w)"),
            ("x_published", "piecewise-linear model, published coefficients"),
            (
                "x_refit",
                "piecewise-linear model, least-squares refit (nan without refit)",
            ),
            ("offset", "x_delta(w) - x_delta(0)"),
        ],
    );
    for (d, &delta) in solved.delta_grid.iter().enumerate() {
        let x0 = solved.lossless[d];
        for (k, &w) in solved.w_grid.iter().enumerate() {
            let x = solved.values[d][k];
            main.push(vec![
                delta.into(),
                w.into(),
                x.into(),
                (x0 + published.offset(delta, w)).into(),
                refit.map(|m| x0 + m.offset(delta, w)).into(),
                (x - x0).into(),
            ]);
        }
    }
    let mse = mse_table(&solved, &published, refit.as_ref());
    let mut plot = String::from(
        "set datafile separator ','\nset xlabel 'w'\nset ylabel 'x_delta(w)'\nset key outside right\nplot \\\n",
    );
    let series: Vec<String> = cfg
        .delta_list
        .iter()
        .enumerate()
        .flat_map(|(i, &delta)| {
            let d = format!("{delta:?}");
            [
                format!("  '{name}.csv' using 2:($1=={d} ? $3 : 1/0) with points pt 6 lc {i} title 'delta={d}'"),
                format!("  '{name}.csv' using 2:($1=={d} ? $4 : 1/0) with lines lc {i} notitle"),
            ]
        })
        .collect();
    plot.push_str(&series.join(", \\\n"));
    plot.push('\n');
    Ok(FigureBundle {
        name: name.to_owned(),
        tables: vec![main, mse],
        plot,
        manifest: manifest(cfg, "xdelta", figure),
    })
}

/// Least-squares refit of the piecewise-linear coefficients.
pub fn fit(cfg: &RunConfig, name: &str) -> Result<FigureBundle, CliError> {
    let solved = XDeltaTable::solve(&cfg.w.points(), &cfg.delta_list).map_err(depth_error)?;
    let published = DepthFitModel::published();
    let refit = fit_table(&solved, DEFAULT_BREAKPOINT).map_err(depth_error)?;
    let mut coeffs = Table::new(
        "coefficients",
        "piecewise-linear coefficients; each is c + d * delta",
        &[
            ("coefficient", "parameter name"),
            ("published", "published value"),
            ("refit", "least-squares value on the configured grid"),
        ],
    );
    let names = ["a0_c", "a0_d", "a1_c", "a1_d", "b0_c", "b0_d", "b1_c", "b1_d"];
    for ((n, p), f) in names.iter().zip(published.params()).zip(refit.params()) {
        coeffs.push(vec![Cell::Text((*n).to_owned()), p.into(), f.into()]);
    }
    coeffs.push(vec![Cell::Text("w0".into()), published.w0.into(), refit.w0.into()]);
    coeffs.push(vec![
        Cell::Text("sse".into()),
        solved.sse(&published).into(),
        solved.sse(&refit).into(),
    ]);
    let mse = mse_table(&solved, &published, Some(&refit));
    let plot = format!(
        "set datafile separator ','\nset xlabel 'delta'\nset ylabel 'MSE'\nset logscale y\nplot '{name}_mse.csv' using 1:2 with linespoints title 'published', \\\n  '{name}_mse.csv' using 1:3 with linespoints title 'refit'\n"
    );
    Ok(FigureBundle {
        name: name.to_owned(),
        tables: vec![coeffs, mse],
        plot,
        manifest: manifest(cfg, "fit", None),
    })
}

/// Depth limits against `w` at a fixed position.
pub fn depth(cfg: &RunConfig, name: &str, figure: Option<u8>) -> Result<FigureBundle, CliError> {
    let source = match cfg.x_source {
        XSourceKind::Numeric => XSource::Numeric,
        XSourceKind::Model => XSource::FittedModel(DepthFitModel::published()),
    };
    let user: SphericalPosition = cfg.user;
    let reference = depth_limits_at(&cfg.array, &user, cfg.delta, 0.0, &XSource::Numeric).map_err(depth_error)?;
    let reference_plus = match reference.delta_plus {
        UpperLimit::Finite(v) => format!("{v:.8e}"),
        UpperLimit::Unbounded => "inf".into(),
    };
    let title = format!(
        "beam depth limits at r = {:?} m; lossless reference delta_minus = {:.8e}, delta_plus = {}",
        user.r, reference.delta_minus, reference_plus
    );
    let mut table = Table::new(
        "depth",
        &title,
        &[
            ("w", "half-aperture attenuation exponent"),
            ("x_delta", "mismatch coordinate used for the limits"),
            ("critical_range", "range beyond which the upper limit is unbounded [m]"),
            ("delta_minus", "lower depth limit [m]"),
            ("delta_plus", "upper depth limit [m], inf when unbounded"),
            (
                "gain_minus",
                "brute-force relative gain with the focus at r - delta_minus",
            ),
            (
                "gain_plus",
                "brute-force relative gain with the focus at r + delta_plus",
            ),
            ("single_kernel_minus", "single-kernel gain at r - delta_minus"),
            ("single_kernel_plus", "single-kernel gain at r + delta_plus"),
        ],
    );
    for w in cfg.w.points() {
        let check = verify_depth_limits(&cfg.array, &user, cfg.delta, w, &source, cfg.mode).map_err(depth_error)?;
        let lim = check.limits;
        table.push(vec![
            w.into(),
            lim.x_delta.into(),
            lim.critical_range.into(),
            lim.delta_minus.into(),
            match lim.delta_plus {
                UpperLimit::Finite(v) => Cell::Num(v),
                UpperLimit::Unbounded => Cell::Inf,
            },
            check.oracle_minus.into(),
            check.oracle_plus.into(),
            check.kernel_minus.into(),
            check.kernel_plus.into(),
        ]);
    }
    let plot = format!(
        "set datafile separator ','\nset xlabel 'w'\nset ylabel 'relative gain'\nset y2label 'depth limit [m]'\nset y2tics\nset logscale y2\nset ytics nomirror\nplot '{name}.csv' using 1:6 with lines title 'gain at r - delta_minus', \\\n  '{name}.csv' using 1:7 with lines title 'gain at r + delta_plus', \\\n  '{name}.csv' using 1:4 axes x1y2 with lines dt 2 title 'delta_minus', \\\n  '{name}.csv' using 1:5 axes x1y2 with lines dt 2 title 'delta_plus'\n"
    );
    Ok(FigureBundle {
        name: name.to_owned(),
        tables: vec![table],
        plot,
        manifest: manifest(cfg, "depth", figure),
    })
}
