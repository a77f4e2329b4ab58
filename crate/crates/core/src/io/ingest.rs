use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PanelDataset, SiteMeta, MJJAS_DAYS};

const EARTH_RADIUS_KM: f64 = 6371.0;

/// Coordinate columns of a sites file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteFormat {
    /// `id,x_km,y_km,elev_m`
    #[default]
    Planar,
    /// `id,lon,lat,elev_m`, projected equirectangularly about the centroid.
    LonLat,
}

impl SiteFormat {
    fn header(self) -> [&'static str; 4] {
        match self {
            SiteFormat::Planar => ["id", "x_km", "y_km", "elev_m"],
            SiteFormat::LonLat => ["id", "lon", "lat", "elev_m"],
        }
    }
}

/// Line number (1-based, header = 1) of a csv record.
fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let got = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != want {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                want.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

fn field_f64(rec: &csv::StringRecord, k: usize, name: &str) -> Result<f64> {
    let line = line_of(rec);
    let raw = rec
        .get(k)
        .ok_or_else(|| parse_err(line, format!("missing column {name}")))?
        .trim();
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, format!("{name}: `{raw}` is not a number")))
}

/// Planar coordinates in km of lon/lat points, by an equirectangular
/// projection about their centroid.
pub fn project_lon_lat(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.is_empty() {
        return Vec::new();
    }
    let n = points.len() as f64;
    let lon0 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let lat0 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    let c = lat0.to_radians().cos();
    points
        .iter()
        .map(|(lon, lat)| (k * (lon - lon0) * c, k * (lat - lat0)))
        .collect()
}

pub fn read_sites<R: Read>(input: R, format: SiteFormat) -> Result<Vec<SiteMeta>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    check_header(&mut rdr, &format.header())?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(parse_err(line_of(&rec), "empty site id"));
        }
        let h = format.header();
        rows.push((
            id,
            field_f64(&rec, 1, h[1])?,
            field_f64(&rec, 2, h[2])?,
            field_f64(&rec, 3, h[3])?,
        ));
    }
    let coords: Vec<(f64, f64)> = match format {
        SiteFormat::Planar => rows.iter().map(|r| (r.1, r.2)).collect(),
        SiteFormat::LonLat => project_lon_lat(&rows.iter().map(|r| (r.1, r.2)).collect::<Vec<_>>()),
    };
    Ok(rows
        .into_iter()
        .zip(coords)
        .map(|((id, _, _, e), (x, y))| SiteMeta::new(id, x, y, e))
        .collect())
}

/// 0-based day of the May-September window, or `None` outside it.
pub fn window_day(date: NaiveDate) -> Option<usize> {
    if !(5..=9).contains(&date.month()) {
        return None;
    }
    let may1 = NaiveDate::from_ymd_opt(date.year(), 5, 1)?;
    Some((date - may1).num_days() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    /// Rows dated outside May-September.
    pub skipped_outside_window: usize,
    /// Rows with an empty or `NA` value.
    pub missing_values: usize,
    /// Fraction of observed cells per site.
    pub completeness: Vec<(String, f64)>,
}

/// Builds the panel from an observations CSV `site_id,date,tmax_c` against
/// known sites. Years run from the first to the last year with a window
/// observation and days from May 1 to the latest window date present in
/// any year; absent days are missing.
pub fn read_observations<R: Read>(
    input: R,
    sites: Vec<SiteMeta>,
    day_of_year_offset: u32,
) -> Result<(PanelDataset, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    check_header(&mut rdr, &["site_id", "date", "tmax_c"])?;
    let index: HashMap<&str, usize> = sites
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut seen = HashSet::new();
    let mut obs: Vec<(i32, usize, usize, f64)> = Vec::new();
    let (mut rows, mut skipped, mut missing, mut n_days) = (0, 0, 0, 0);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        rows += 1;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let id = &rec[0];
        let i = *index
            .get(id)
            .ok_or_else(|| parse_err(line, format!("unknown site_id `{id}`")))?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|_| parse_err(line, format!("date `{}` is not YYYY-MM-DD", &rec[1])))?;
        if !seen.insert((i, date)) {
            return Err(parse_err(
                line,
                format!("duplicate observation for {id} on {date}"),
            ));
        }
        let Some(l) = window_day(date) else {
            skipped += 1;
            continue;
        };
        n_days = n_days.max(l + 1);
        let raw = &rec[2];
        if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
            missing += 1;
            continue;
        }
        let v = field_f64(&rec, 2, "tmax_c")?;
        obs.push((date.year(), l, i, v));
    }
    if skipped > 0 {
        log::info!("skipped {skipped} rows outside May-September");
    }
    let first = obs.iter().map(|o| o.0).min();
    let last = obs.iter().map(|o| o.0).max();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::EmptyPanel(
            "no observations inside May-September".into(),
        ));
    };
    let n_years = (last - first + 1) as usize;
    let n_sites = sites.len();
    let mut values = vec![f64::NAN; n_years * n_days * n_sites];
    for (y, l, i, v) in obs {
        let t = (y - first) as usize;
        values[(t * n_days + l) * n_sites + i] = v;
    }
    let panel = PanelDataset::new(sites, n_years, n_days, values, first, day_of_year_offset)?;
    let completeness = panel
        .sites()
        .iter()
        .map(|s| s.id.clone())
        .zip(panel.completeness())
        .collect();
    Ok((
        panel,
        IngestReport {
            rows,
            skipped_outside_window: skipped,
            missing_values: missing,
            completeness,
        },
    ))
}

/// Reads a sites file and an observations file into a panel.
pub fn ingest(
    sites_path: &Path,
    observations_path: &Path,
    format: SiteFormat,
    day_of_year_offset: u32,
) -> Result<(PanelDataset, IngestReport)> {
    let sites = read_sites(open(sites_path)?, format)?;
    read_observations(open(observations_path)?, sites, day_of_year_offset)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn write_sites_csv<W: Write>(out: W, sites: &[SiteMeta]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SiteFormat::Planar.header())?;
    for s in sites {
        w.write_record([
            s.id.clone(),
            s.x.to_string(),
            s.y.to_string(),
            s.elevation.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Observed cells as `site_id,date,tmax_c`, site by site. Panels with a
/// window other than May-September cannot be dated and are rejected.
pub fn write_observations_csv<W: Write>(out: W, panel: &PanelDataset) -> Result<()> {
    if panel.n_days() > MJJAS_DAYS {
        return Err(Error::InvalidConfig(format!(
            "cannot date a {}-day window",
            panel.n_days()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["site_id", "date", "tmax_c"])?;
    for (i, s) in panel.sites().iter().enumerate() {
        for t in 0..panel.n_years() {
            let year = panel.first_year + t as i32;
            let may1 = NaiveDate::from_ymd_opt(year, 5, 1)
                .ok_or_else(|| Error::InvalidConfig(format!("year {year} out of range")))?;
            for l in 0..panel.n_days() {
                if let Some(v) = panel.value(t, l, i) {
                    let d = may1 + Duration::days(l as i64);
                    w.write_record([
                        s.id.clone(),
                        d.format("%Y-%m-%d").to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_site() -> Vec<SiteMeta> {
        vec![SiteMeta::new("Z", 0.0, 0.0, 250.0)]
    }

    #[test]
    fn full_summer_gives_153_days() {
        let mut s = String::from("site_id,date,tmax_c\n");
        let may1 = NaiveDate::from_ymd_opt(1990, 5, 1).unwrap();
        for l in 0..153 {
            s += &format!(
                "Z,{},{}\n",
                may1 + Duration::days(l),
                20.0 + l as f64 * 0.01
            );
        }
        let (p, r) = read_observations(s.as_bytes(), one_site(), 0).unwrap();
        assert_eq!((p.n_years(), p.n_days(), p.n_sites()), (1, 153, 1));
        assert_eq!(r.completeness[0].1, 1.0);
        assert_eq!(
            window_day(NaiveDate::from_ymd_opt(1990, 9, 30).unwrap()),
            Some(152)
        );
    }

    #[test]
    fn window_rule_and_errors() {
        let s = "site_id,date,tmax_c\nZ,1990-02-01,10\nZ,1990-05-02,21\n";
        let (_, r) = read_observations(s.as_bytes(), one_site(), 0).unwrap();
        assert_eq!(r.skipped_outside_window, 1);

        let empty = "site_id,date,tmax_c\n";
        assert!(matches!(
            read_observations(empty.as_bytes(), one_site(), 0),
            Err(Error::EmptyPanel(_))
        ));
        let unknown = "site_id,date,tmax_c\nZ,1990-05-02,21\nQ,1990-05-02,21\n";
        assert!(matches!(
            read_observations(unknown.as_bytes(), one_site(), 0),
            Err(Error::Parse { line: 3, .. })
        ));
        let dup = "site_id,date,tmax_c\nZ,1990-05-02,21\nZ,1990-05-02,22\n";
        assert!(matches!(
            read_observations(dup.as_bytes(), one_site(), 0),
            Err(Error::Parse { line: 3, .. })
        ));
        let bad = "site_id,date,tmax_c\nZ,1990-05-02,hot\n";
        assert!(matches!(
            read_observations(bad.as_bytes(), one_site(), 0),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn sites_header_checked_and_lonlat_projected() {
        assert!(read_sites("id,x,y,elev\n".as_bytes(), SiteFormat::Planar).is_err());
        let s = "id,lon,lat,elev_m\na,-1.0,41.0,200\nb,0.0,41.0,300\n";
        let sites = read_sites(s.as_bytes(), SiteFormat::LonLat).unwrap();
        let d = sites[0].distance(&sites[1]);
        // one degree of longitude at 41°N
        assert!((d - 111.19 * 41f64.to_radians().cos()).abs() < 0.1, "{d}");
    }
}
