//! Point clouds sampled from a manifold, with a lossless CSV form.

use super::{GeometryError, Vec3};
use crate::jsonfmt::format_float;

pub(crate) const CSV_HEADER: &str = "component_id,param0,param1,x,y,z";

/// One sampled point: the component it came from, its chart parameters
/// (empty for 0-d components, one angle for circles, two for spheres), and
/// its ambient position.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub component_id: usize,
    pub params: Vec<f64>,
    pub position: Vec3,
}

/// An ordered collection of samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    pub points: Vec<SamplePoint>,
}

impl PointSet {
    pub fn new(points: Vec<SamplePoint>) -> Self {
        PointSet { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.iter().map(|p| p.position)
    }

    /// Renders the set as CSV with header
    /// `component_id,param0,param1,x,y,z`. Unused parameter columns are left
    /// empty (both for points, `param1` for circles). Floats carry 17
    /// significant digits, so parsing the output reproduces the set exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.points.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let param = |i: usize| p.params.get(i).map(|v| format_float(*v)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.component_id,
                param(0),
                param(1),
                format_float(p.position.x),
                format_float(p.position.y),
                format_float(p.position.z),
            ));
        }
        out
    }

    /// Parses the CSV form produced by [`Self::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, GeometryError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(GeometryError::InvalidCsv {
            line: 1,
            message: "empty input, expected a header row".into(),
        })?;
        if header.trim_end_matches('\r') != CSV_HEADER {
            return Err(GeometryError::InvalidCsv {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`, got `{header}`"),
            });
        }
        let mut points = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            let row = raw.trim_end_matches('\r');
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 6 {
                return Err(GeometryError::InvalidCsv {
                    line,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let component_id =
                fields[0]
                    .parse::<usize>()
                    .map_err(|e| GeometryError::InvalidCsv {
                        line,
                        message: format!("bad component_id `{}`: {e}", fields[0]),
                    })?;
            let parse_f64 = |name: &str, s: &str| -> Result<f64, GeometryError> {
                s.parse::<f64>().map_err(|e| GeometryError::InvalidCsv {
                    line,
                    message: format!("bad {name} `{s}`: {e}"),
                })
            };
            let mut params = Vec::new();
            if !fields[1].is_empty() {
                params.push(parse_f64("param0", fields[1])?);
            }
            if !fields[2].is_empty() {
                if fields[1].is_empty() {
                    return Err(GeometryError::InvalidCsv {
                        line,
                        message: "param1 is set but param0 is empty".into(),
                    });
                }
                params.push(parse_f64("param1", fields[2])?);
            }
            let x = parse_f64("x", fields[3])?;
            let y = parse_f64("y", fields[4])?;
            let z = parse_f64("z", fields[5])?;
            for (name, v) in [("x", x), ("y", y), ("z", z)] {
                if !v.is_finite() {
                    return Err(GeometryError::InvalidCsv {
                        line,
                        message: format!("{name} must be finite, got {v}"),
                    });
                }
            }
            points.push(SamplePoint {
                component_id,
                params,
                position: Vec3::new(x, y, z),
            });
        }
        Ok(PointSet { points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(component_id: usize, params: &[f64], pos: [f64; 3]) -> SamplePoint {
        SamplePoint {
            component_id,
            params: params.to_vec(),
            position: Vec3::new(pos[0], pos[1], pos[2]),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let set = PointSet::new(vec![
            sample(0, &[0.1234567890123456789], [1.0 / 3.0, -2.5e-17, 7.0]),
            sample(1, &[std::f64::consts::PI, 2.718281828459045], [0.0, -0.0, 1e300]),
            sample(2, &[], [1.0, 2.0, 3.0]),
        ]);
        let csv = set.to_csv();
        let back = PointSet::from_csv(&csv).unwrap();
        assert_eq!(back.len(), set.len());
        for (a, b) in set.points.iter().zip(&back.points) {
            assert_eq!(a.component_id, b.component_id);
            assert_eq!(a.params.len(), b.params.len());
            for (pa, pb) in a.params.iter().zip(&b.params) {
                assert_eq!(pa.to_bits(), pb.to_bits());
            }
            for i in 0..3 {
                assert_eq!(a.position[i].to_bits(), b.position[i].to_bits());
            }
        }
        // Rendering the parsed set again gives the same bytes back.
        assert_eq!(csv, back.to_csv());
    }

    #[test]
    fn csv_header_and_empty_columns() {
        let set = PointSet::new(vec![sample(0, &[1.5], [0.0, 0.0, 0.0])]);
        let csv = set.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "component_id,param0,param1,x,y,z");
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[2], "", "param1 must stay empty for 1-d components");
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(PointSet::from_csv("").is_err());
        assert!(PointSet::from_csv("a,b,c\n").is_err());
        let bad_fields = "component_id,param0,param1,x,y,z\n0,1.0,2.0\n";
        assert!(matches!(
            PointSet::from_csv(bad_fields),
            Err(GeometryError::InvalidCsv { line: 2, .. })
        ));
        let bad_float = "component_id,param0,param1,x,y,z\n0,1.0,,oops,0.0,0.0\n";
        assert!(PointSet::from_csv(bad_float).is_err());
        let bad_id = "component_id,param0,param1,x,y,z\n-1,1.0,,0.0,0.0,0.0\n";
        assert!(PointSet::from_csv(bad_id).is_err());
        let nan = "component_id,param0,param1,x,y,z\n0,1.0,,NaN,0.0,0.0\n";
        assert!(PointSet::from_csv(nan).is_err());
        let orphan_param1 = "component_id,param0,param1,x,y,z\n0,,2.0,0.0,0.0,0.0\n";
        assert!(PointSet::from_csv(orphan_param1).is_err());
    }

    #[test]
    fn csv_accepts_blank_trailing_line_and_crlf() {
        let text = "component_id,param0,param1,x,y,z\r\n0,1.0,,0.5,0.25,0.125\r\n\r\n";
        let set = PointSet::from_csv(text).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.points[0].params, vec![1.0]);
    }
}
