//! Shared test support: independently coded oracles (kept free of the
//! library's numeric paths) and a planted-model synthetic data generator.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// plain-vector linear algebra, hand-rolled for oracle independence
// ---------------------------------------------------------------------------

pub type Mat = Vec<Vec<f64>>;

pub fn mat_zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

/// Gaussian elimination with partial pivoting; returns None when singular.
pub fn solve_linear(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Mat = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = rhs[row];
        for k in (row + 1)..n {
            sum -= m[row][k] * x[k];
        }
        x[row] = sum / m[row][row];
    }
    Some(x)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &Mat) -> f64 {
    let n = a.len();
    let mut m: Mat = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(col, pivot);
            det = -det;
        }
        det *= m[col][col];
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    det
}

/// Gauss-Jordan inverse; returns None when singular.
pub fn invert(a: &Mat) -> Option<Mat> {
    let n = a.len();
    let mut m: Mat = a.to_vec();
    let mut inv = mat_zeros(n, n);
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = m[col][col];
        for k in 0..n {
            m[col][k] /= scale;
            inv[col][k] /= scale;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row][col];
            for k in 0..n {
                m[row][k] -= factor * m[col][k];
                inv[row][k] -= factor * inv[col][k];
            }
        }
    }
    Some(inv)
}

pub fn pearson_simple(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Column-wise Pearson correlation matrix; rows of `data` are
/// observations.
pub fn correlation_oracle(data: &Mat) -> Mat {
    let p = data[0].len();
    let mut r = mat_zeros(p, p);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| data.iter().map(|row| row[j]).collect())
        .collect();
    for j in 0..p {
        r[j][j] = 1.0;
        for k in (j + 1)..p {
            let v = pearson_simple(&cols[j], &cols[k]);
            r[j][k] = v;
            r[k][j] = v;
        }
    }
    r
}

// ---------------------------------------------------------------------------
// special functions, textbook series/continued-fraction versions
// ---------------------------------------------------------------------------

/// Lanczos approximation of ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut series = 1.000000000190015;
    for c in COEFFS {
        y += 1.0;
        series += c / y;
    }
    -tmp + (2.5066282746310005 * series / x).ln()
}

/// Regularized upper incomplete gamma Q(a, x), series plus Lentz
/// continued fraction.
pub fn gamma_q_oracle(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        // lower series
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // Lentz continued fraction for the upper tail
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }
}

// ---------------------------------------------------------------------------
// statistical oracles
// ---------------------------------------------------------------------------

/// Bartlett sphericity statistic computed on a separate code path.
pub fn bartlett_oracle(data: &Mat) -> (f64, u64, f64) {
    let n = data.len() as f64;
    let p = data[0].len() as f64;
    let r = correlation_oracle(data);
    let det = determinant(&r);
    let chi2 = (-(n - 1.0 - (2.0 * p + 5.0) / 6.0) * det.ln()).max(0.0);
    let df = (p * (p - 1.0) / 2.0) as u64;
    let p_value = gamma_q_oracle(df as f64 / 2.0, chi2 / 2.0);
    (chi2, df, p_value)
}

/// KMO measure computed on a separate code path (Gauss-Jordan inverse).
pub fn kmo_oracle(data: &Mat) -> f64 {
    let r = correlation_oracle(data);
    let p = r.len();
    let inv = invert(&r).expect("oracle: correlation matrix invertible");
    let mut sum_r2 = 0.0;
    let mut sum_q2 = 0.0;
    for j in 0..p {
        for k in 0..p {
            if j == k {
                continue;
            }
            let q = -inv[j][k] / (inv[j][j] * inv[k][k]).sqrt();
            sum_r2 += r[j][k] * r[j][k];
            sum_q2 += q * q;
        }
    }
    sum_r2 / (sum_r2 + sum_q2)
}

/// Great-circle distance via the atan2 haversine form (the library uses
/// the asin form).
pub fn haversine_oracle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let radius = 6371.0088;
    let p1 = lat1.to_radians();
    let p2 = lat2.to_radians();
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    let c = 2.0 * a.sqrt().atan2((1.0 - a).sqrt());
    radius * c
}

fn covariance_oracle(data: &Mat) -> Mat {
    let n = data.len();
    let p = data[0].len();
    let means: Vec<f64> = (0..p)
        .map(|j| data.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = mat_zeros(p, p);
    for j in 0..p {
        for k in 0..p {
            let mut sum = 0.0;
            for row in data {
                sum += (row[j] - means[j]) * (row[k] - means[k]);
            }
            c[j][k] = sum / (n as f64 - 1.0);
        }
    }
    c
}

fn cross_covariance_oracle(x: &Mat, y: &Mat) -> Mat {
    let n = x.len();
    let p = x[0].len();
    let q = y[0].len();
    let mx: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    let my: Vec<f64> = (0..q)
        .map(|j| y.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = mat_zeros(p, q);
    for j in 0..p {
        for k in 0..q {
            let mut sum = 0.0;
            for i in 0..n {
                sum += (x[i][j] - mx[j]) * (y[i][k] - my[k]);
            }
            c[j][k] = sum / (n as f64 - 1.0);
        }
    }
    c
}

fn project(data: &Mat, w: &[f64]) -> Vec<f64> {
    data.iter()
        .map(|row| row.iter().zip(w).map(|(v, c)| v * c).sum())
        .collect()
}

/// Brute-force first canonical correlation: alternating conditional
/// maximization over unit directions from many random starts, using only
/// the hand-rolled solver above.
pub fn cca_rho_oracle(x: &Mat, y: &Mat, restarts: usize, seed: u64) -> f64 {
    let cxx = covariance_oracle(x);
    let cyy = covariance_oracle(y);
    let cxy = cross_covariance_oracle(x, y);
    let cyx: Mat = {
        let (p, q) = (cxy.len(), cxy[0].len());
        let mut t = mat_zeros(q, p);
        for i in 0..p {
            for j in 0..q {
                t[j][i] = cxy[i][j];
            }
        }
        t
    };
    let k = x[0].len();
    let m = y[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..restarts {
        let mut b: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5). collect();
        let mut rho_prev = -1.0;
        for _ in 0..200 {
            // best a for fixed b, then best b for fixed a
            let target_a: Vec<f64> = (0..k)
                .map(|j| (0..m).map(|l| cxy[j][l] * b[l]).sum())
                .collect();
            let a = match solve_linear(&cxx, &target_a) {
                Some(v) => v,
                None => break,
            };
            let target_b: Vec<f64> = (0..m)
                .map(|l| (0..k).map(|j| cyx[l][j] * a[j]).sum())
                .collect();
            b = match solve_linear(&cyy, &target_b) {
                Some(v) => v,
                None => break,
            };
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            for v in &mut b {
                *v /= norm;
            }
            let rho = pearson_simple(&project(x, &a), &project(y, &b)).abs();
            if (rho - rho_prev).abs() < 1e-13 {
                rho_prev = rho;
                break;
            }
            rho_prev = rho;
        }
        best = best.max(rho_prev);
    }
    best
}

/// Exhaustive enumeration of all contiguous partitions of the sorted
/// values into `groups` clusters; returns the minimal within-cluster sum
/// of squares.
pub fn kmeans_wcss_oracle(values: &[f64], groups: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let cost = |lo: usize, hi: usize| -> f64 {
        let slice = &sorted[lo..hi];
        let mean = slice.iter().sum::<f64>() / slice.len() as f64;
        slice.iter().map(|v| (v - mean) * (v - mean)).sum()
    };
    fn recurse(
        cost: &dyn Fn(usize, usize) -> f64,
        start: usize,
        n: usize,
        remaining: usize,
        acc: f64,
        best: &mut f64,
    ) {
        if remaining == 1 {
            let total = acc + cost(start, n);
            if total < *best {
                *best = total;
            }
            return;
        }
        // leave at least one element per remaining cluster
        for end in (start + 1)..=(n - remaining + 1) {
            recurse(cost, end, n, remaining - 1, acc + cost(start, end), best);
        }
    }
    let mut best = f64::INFINITY;
    recurse(&cost, 0, n, groups, 0.0, &mut best);
    best
}

/// Column-wise ordinary least squares via normal equations, hand-rolled.
/// Returns the (r+1) x m coefficient matrix, intercept first.
pub fn ols_columns_oracle(z: &Mat, y: &Mat) -> Mat {
    let n = z.len();
    let r = z[0].len();
    let m = y[0].len();
    // design with intercept
    let design: Mat = (0..n)
        .map(|i| {
            let mut row = vec![1.0];
            row.extend(&z[i]);
            row
        })
        .collect();
    let mut xtx = mat_zeros(r + 1, r + 1);
    for j in 0..=r {
        for k in 0..=r {
            xtx[j][k] = (0..n).map(|i| design[i][j] * design[i][k]).sum();
        }
    }
    let mut coeffs = mat_zeros(r + 1, m);
    for c in 0..m {
        let xty: Vec<f64> = (0..=r)
            .map(|j| (0..n).map(|i| design[i][j] * y[i][c]).sum())
            .collect();
        let beta = solve_linear(&xtx, &xty).expect("oracle design is full rank");
        for j in 0..=r {
            coeffs[j][c] = beta[j];
        }
    }
    coeffs
}

// ---------------------------------------------------------------------------
// planted-model synthetic data
// ---------------------------------------------------------------------------

pub struct SyntheticOptions {
    pub n_regions: usize,
    pub seed: u64,
    /// Planted composite weights over the three factors (sum to one).
    pub factor_weights: [f64; 3],
    /// Loadings of the three indicators of each factor block.
    pub loadings: [[f64; 3]; 3],
    /// Uniform noise half-width added to the hazard signal.
    pub hazard_noise: f64,
    pub with_gates: bool,
    pub bins: usize,
    /// Round CSV values to this many decimals (fixture tidiness); None
    /// keeps full precision.
    pub decimals: Option<usize>,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            n_regions: 600,
            seed: 20260801,
            factor_weights: [0.5, 0.3, 0.2],
            loadings: [[0.95, 0.9, 0.92], [0.93, 0.95, 0.9], [0.9, 0.92, 0.95]],
            hazard_noise: 0.02,
            with_gates: false,
            bins: 5,
            decimals: None,
        }
    }
}

pub struct Synthetic {
    pub indicators_csv: String,
    pub regions_geojson: String,
    pub gates_csv: Option<String>,
    pub config_toml: String,
    /// Planted composite weights, for recovery checks.
    pub factor_weights: [f64; 3],
}

pub const FACTOR_NAMES: [&str; 3] = ["exposure", "transmission", "vulnerability"];
pub const INDICATOR_NAMES: [[&str; 3]; 3] = [
    ["population_density", "commuter_share", "foreign_tourists"],
    ["religious_places", "minimarkets", "markets"],
    ["elderly_share", "comorbidity_share", "small_house_share"],
];
pub const HAZARD_NAMES: [&str; 3] = ["confirmed", "pdp", "odp"];

fn fmt(v: f64, decimals: Option<usize>) -> String {
    match decimals {
        Some(d) => format!("{v:.d$}"),
        None => format!("{v}"),
    }
}

fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Generate a complete synthetic dataset from a planted three-factor
/// model with a known composite relation to the hazard columns.
pub fn generate(options: &SyntheticOptions) -> Synthetic {
    let n = options.n_regions;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    // rectangular grid of regions
    let grid_cols = (n as f64).sqrt().ceil() as usize;
    let mut features = Vec::with_capacity(n);
    let mut region_ids = Vec::with_capacity(n);
    let width = if n >= 100 { 3 } else { 2 };
    for i in 0..n {
        let col = i % grid_cols;
        let row = i / grid_cols;
        let lon0 = 100.0 + col as f64;
        let lat0 = -8.0 + row as f64 * 0.75;
        let (lon1, lat1) = (lon0 + 1.0, lat0 + 0.75);
        let id = format!("R{:0width$}", i + 1, width = width);
        let tag = if col * 2 < grid_cols { "west" } else { "east" };
        features.push(format!(
            concat!(
                "    {{\"type\":\"Feature\",\"properties\":{{\"region_id\":\"{id}\",",
                "\"name\":\"Region {num}\",\"group_tag\":\"{tag}\"}},",
                "\"geometry\":{{\"type\":\"Polygon\",\"coordinates\":",
                "[[[{lon0},{lat0}],[{lon1},{lat0}],[{lon1},{lat1}],[{lon0},{lat1}],[{lon0},{lat0}]]]}}}}"
            ),
            id = id,
            num = i + 1,
            tag = tag,
            lon0 = lon0,
            lat0 = lat0,
            lon1 = lon1,
            lat1 = lat1,
        ));
        region_ids.push(id);
    }
    let regions_geojson = format!(
        "{{\"type\":\"FeatureCollection\",\"features\":[\n{}\n]}}\n",
        features.join(",\n")
    );

    // optional gates; arrivals feed the exposure factor below
    let (gates_csv, arrivals) = if options.with_gates {
        let gates = "gate_id,lat,lon,arrivals,buffer_km\n\
             G_AIR,-7.6,100.5,52000,50\n\
             G_SEA,-7.25,102.0,8100,25\n\
             G_BORDER,-5.4,103.6,1900,25\n";
        let dir = tempfile::tempdir().expect("tempdir");
        std::fs::write(dir.path().join("regions.geojson"), &regions_geojson).unwrap();
        std::fs::write(dir.path().join("gates.csv"), gates).unwrap();
        let regions = riskdex::ingest::load_regions(&dir.path().join("regions.geojson")).unwrap();
        let loaded = riskdex::ingest::load_gates(&dir.path().join("gates.csv")).unwrap();
        let arrivals = riskdex::ingest::assign_gate_arrivals(&regions, &loaded).unwrap();
        (Some(gates.to_string()), Some(arrivals))
    } else {
        (None, None)
    };

    // latent factors, uniform on [0,1]; exposure blends in gate arrivals
    // when present so the buffered column correlates with its block
    let mut latent = vec![[0.0f64; 3]; n];
    for row in latent.iter_mut() {
        for slot in row.iter_mut() {
            *slot = rng.gen::<f64>();
        }
    }
    if let Some(arrivals) = &arrivals {
        let z = minmax_normalize(arrivals);
        for (i, row) in latent.iter_mut().enumerate() {
            row[0] = 0.55 * z[i] + 0.45 * row[0];
        }
    }

    // indicators per block: loading * latent + residual of matching scale
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (k, block) in INDICATOR_NAMES.iter().enumerate() {
        for (j, name) in block.iter().enumerate() {
            if name == &"foreign_tourists" && arrivals.is_some() {
                // replaced by gate buffering inside the pipeline; store
                // the same counts so runs without gates agree in spirit
                columns.push((name.to_string(), arrivals.clone().unwrap()));
                continue;
            }
            let lambda = options.loadings[k][j];
            let resid = (1.0 - lambda * lambda).sqrt();
            let scale = match (k, j) {
                (0, 0) => 12000.0,
                (0, 1) => 0.45,
                (0, 2) => 60000.0,
                (1, _) => 900.0 * (j as f64 + 1.0),
                (2, _) => 0.6,
                _ => 1.0,
            };
            let values: Vec<f64> = (0..n)
                .map(|i| scale * (lambda * latent[i][k] + resid * rng.gen::<f64>()))
                .collect();
            columns.push((name.to_string(), values));
        }
    }

    // hazard signal with the planted composite weights
    let z_latent: Vec<Vec<f64>> = (0..3)
        .map(|k| minmax_normalize(&latent.iter().map(|row| row[k]).collect::<Vec<f64>>()))
        .collect();
    let signal: Vec<f64> = (0..n)
        .map(|i| {
            options
                .factor_weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * z_latent[k][i])
                .sum()
        })
        .collect();
    for (m, name) in HAZARD_NAMES.iter().enumerate() {
        let scale = [220.0, 90.0, 400.0][m];
        let values: Vec<f64> = signal
            .iter()
            .map(|h| (scale * (h + options.hazard_noise * (rng.gen::<f64>() - 0.5))).max(0.0))
            .collect();
        columns.push((name.to_string(), values));
    }

    // CSV assembly
    let mut csv = String::from("region_id");
    for (name, _) in &columns {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for i in 0..n {
        csv.push_str(&region_ids[i]);
        for (_, values) in &columns {
            csv.push(',');
            csv.push_str(&fmt(values[i], options.decimals));
        }
        csv.push('\n');
    }

    let gates_line = if options.with_gates {
        "gates = \"gates.csv\"\ntourist_column = \"foreign_tourists\"\n"
    } else {
        ""
    };
    let config_toml = format!(
        "indicators = \"indicators.csv\"\n\
         regions = \"regions.geojson\"\n\
         {gates_line}\
         output_dir = \"out\"\n\
         bins = {bins}\n\
         hazard = [\"confirmed\", \"pdp\", \"odp\"]\n\
         \n\
         [[factor]]\n\
         name = \"exposure\"\n\
         indicators = [\"population_density\", \"commuter_share\", \"foreign_tourists\"]\n\
         \n\
         [[factor]]\n\
         name = \"transmission\"\n\
         indicators = [\"religious_places\", \"minimarkets\", \"markets\"]\n\
         \n\
         [[factor]]\n\
         name = \"vulnerability\"\n\
         indicators = [\"elderly_share\", \"comorbidity_share\", \"small_house_share\"]\n",
        gates_line = gates_line,
        bins = options.bins,
    );

    Synthetic {
        indicators_csv: csv,
        regions_geojson,
        gates_csv,
        config_toml,
        factor_weights: options.factor_weights,
    }
}

/// Write a synthetic dataset into `dir` and return the config path.
pub fn write_synthetic(dir: &std::path::Path, synthetic: &Synthetic) -> std::path::PathBuf {
    std::fs::write(dir.join("indicators.csv"), &synthetic.indicators_csv).unwrap();
    std::fs::write(dir.join("regions.geojson"), &synthetic.regions_geojson).unwrap();
    if let Some(gates) = &synthetic.gates_csv {
        std::fs::write(dir.join("gates.csv"), gates).unwrap();
    }
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, &synthetic.config_toml).unwrap();
    config_path
}
