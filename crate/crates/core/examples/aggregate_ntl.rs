//! Area-weighted city radiance from a small pixel table with fill values
//! and gap-filled retrievals, and one day where a pixel is absent.
//!
//! cargo run --example aggregate_ntl

use chrono::{Duration, NaiveDate};
use heatlight::ntl::{aggregate_series, PixelObservation, QualityFlag};

fn main() -> heatlight::Result<()> {
    let start = NaiveDate::from_ymd_opt(2018, 7, 1).expect("valid date");
    let mut pixels = Vec::new();
    for day in 0..5 {
        let date = start + Duration::days(day);
        for (id, area, base) in [("p1", 0.2, 400.0), ("p2", 0.2, 250.0), ("p3", 0.1, 900.0)] {
            // p1 is missing from the table on the last day
            if day == 4 && id == "p1" {
                continue;
            }
            pixels.push(PixelObservation {
                pixel_id: id.into(),
                date,
                raw_radiance: base + 10.0 * day as f64,
                area,
                quality_flag: if day % 2 == 1 && id == "p2" { QualityFlag::GapFilled } else { QualityFlag::GoodQuality },
                // one fill value on day 3
                is_fill: day == 3 && id == "p3",
            });
        }
    }
    let (series, report) = aggregate_series(&pixels, 0.1)?;
    println!("date        radiance  gap-filled share");
    for n in &series {
        println!("{}  {:8.3}  {:.3}", n.date, n.radiance, n.gap_fraction);
    }
    println!(
        "{} dates, {} fill pixels skipped, pixel set changed on {:?}",
        report.dates, report.fill_pixels, report.inconsistent_pixel_sets
    );
    Ok(())
}
