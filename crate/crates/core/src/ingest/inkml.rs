//! Reader for the InkML subset used by public handwriting datasets:
//! `<trace>` elements holding comma-separated "x y t" triples, grouped by
//! optional `<traceGroup>` wrappers, plus `<annotation>` label channels.
//! Brush, canvas, and other full-InkML features are rejected rather than
//! silently misread. Annotation channel names vary between dataset
//! releases, so the channel to use is a parameter instead of a guess.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use quick_xml::events::Event;
use quick_xml::Reader;

use super::IngestError;
use crate::ink::{Point, RawInk, Stroke};

#[derive(Debug, Clone, Default)]
pub struct InkmlOptions {
    /// `type` attribute of the annotation element that carries the label;
    /// when unset, the document's first annotation is used.
    pub annotation_type: Option<String>,
}

/// Container elements whose subtrees carry no stroke data and are skipped
/// wholesale.
const SKIPPED: &[&str] = &["annotationXML", "traceFormat"];
/// Elements the subset understands.
const KNOWN: &[&str] = &["ink", "trace", "traceGroup", "annotation"];

/// Parse one InkML document into a single ink. Traces become strokes in
/// document order; timestamps are rebased so the first point is t = 0.
pub fn read_inkml(path: &Path, options: &InkmlOptions) -> Result<RawInk, IngestError> {
    let mut reader = Reader::from_file(path).map_err(|e| IngestError::Xml {
        path: path.to_path_buf(),
        offset: 0,
        message: e.to_string(),
    })?;
    reader.config_mut().trim_text(true);

    let xml_err = |reader: &Reader<_>, message: String| IngestError::Xml {
        path: path.to_path_buf(),
        offset: reader.buffer_position(),
        message,
    };

    let mut buf = Vec::new();
    let mut strokes: Vec<Stroke> = Vec::new();
    let mut annotations: Vec<(Option<String>, String)> = Vec::new();

    let mut skip_depth = 0usize;
    let mut in_trace = false;
    let mut trace_text = String::new();
    let mut annotation_type: Option<String> = None;
    let mut annotation_text: Option<String> = None;

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                let empty = matches!(event, Event::Empty(_));
                if skip_depth > 0 {
                    if !empty {
                        skip_depth += 1;
                    }
                    continue;
                }
                match name.as_str() {
                    _ if SKIPPED.contains(&name.as_str()) => {
                        if !empty {
                            skip_depth = 1;
                        }
                    }
                    "trace" => {
                        if !empty {
                            in_trace = true;
                            trace_text.clear();
                        }
                    }
                    "annotation" => {
                        let mut ty = None;
                        for attr in e.attributes() {
                            let attr = attr.map_err(|e| xml_err(&reader, e.to_string()))?;
                            if attr.key.local_name().as_ref() == b"type" {
                                ty = Some(
                                    attr.unescape_value()
                                        .map_err(|e| xml_err(&reader, e.to_string()))?
                                        .into_owned(),
                                );
                            }
                        }
                        if empty {
                            annotations.push((ty, String::new()));
                        } else {
                            annotation_type = ty;
                            annotation_text = Some(String::new());
                        }
                    }
                    _ if KNOWN.contains(&name.as_str()) => {}
                    _ => {
                        return Err(IngestError::UnsupportedInkml {
                            path: path.to_path_buf(),
                            element: name,
                            offset: reader.buffer_position(),
                        });
                    }
                }
            }
            Event::End(ref e) => {
                if skip_depth > 0 {
                    skip_depth -= 1;
                    continue;
                }
                match e.local_name().as_ref() {
                    b"trace" => {
                        in_trace = false;
                        let points = parse_trace(&trace_text, strokes.len(), path)?;
                        strokes.push(Stroke::new(points));
                    }
                    b"annotation" => {
                        annotations.push((
                            annotation_type.take(),
                            annotation_text.take().unwrap_or_default(),
                        ));
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if skip_depth > 0 {
                    continue;
                }
                let text = t.unescape().map_err(|e| xml_err(&reader, e.to_string()))?;
                if in_trace {
                    if !trace_text.is_empty() {
                        trace_text.push(' ');
                    }
                    trace_text.push_str(&text);
                } else if let Some(buf) = annotation_text.as_mut() {
                    buf.push_str(&text);
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    if strokes.is_empty() {
        return Err(IngestError::Trace {
            path: path.to_path_buf(),
            trace: 0,
            message: "document contains no traces".to_string(),
        });
    }

    let label = match &options.annotation_type {
        Some(wanted) => annotations
            .iter()
            .find(|(ty, _)| ty.as_deref() == Some(wanted.as_str()))
            .map(|(_, text)| text.clone()),
        None => annotations.first().map(|(_, text)| text.clone()),
    };

    // Rebase timestamps to the ink's first point.
    let t0 = strokes[0].points[0].t;
    for stroke in &mut strokes {
        for p in &mut stroke.points {
            p.t -= t0;
        }
    }

    let mut metadata = BTreeMap::new();
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        metadata.insert("id".to_string(), stem.to_string());
    }
    Ok(RawInk {
        strokes,
        label,
        metadata,
    })
}

fn parse_trace(text: &str, trace: usize, path: &Path) -> Result<Vec<Point>, IngestError> {
    let err = |message: String| IngestError::Trace {
        path: path.to_path_buf(),
        trace,
        message,
    };
    let mut points = Vec::new();
    for chunk in text.split(',') {
        let tokens: Vec<&str> = chunk.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 3 {
            return Err(err(format!(
                "expected 3 values per point, got {} in {chunk:?}",
                tokens.len()
            )));
        }
        let mut values = [0.0f64; 3];
        for (i, token) in tokens.iter().enumerate() {
            values[i] = token
                .parse()
                .map_err(|_| err(format!("non-numeric value {token:?}")))?;
        }
        points.push(Point::new(values[0], values[1], values[2]));
    }
    if points.is_empty() {
        return Err(err("empty trace".to_string()));
    }
    Ok(points)
}

/// All `.inkml` / `.xml` files of a directory in sorted order, each parsed
/// as one ink.
pub fn read_inkml_dir<'a>(
    dir: &Path,
    options: &'a InkmlOptions,
) -> Result<impl Iterator<Item = (PathBuf, Result<RawInk, IngestError>)> + 'a, IngestError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| super::io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("inkml") | Some("xml")
            )
        })
        .collect();
    files.sort();
    Ok(files.into_iter().map(move |path| {
        let ink = read_inkml(&path, options);
        (path, ink)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_doc(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn parses_a_single_trace() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "a.inkml",
            r#"<ink xmlns="http://www.w3.org/2003/InkML"><trace>0 0 0, 5 5 8</trace></ink>"#,
        );
        let ink = read_inkml(&path, &InkmlOptions::default()).unwrap();
        assert_eq!(ink.strokes.len(), 1);
        assert_eq!(
            ink.strokes[0].points,
            vec![Point::new(0.0, 0.0, 0.0), Point::new(5.0, 5.0, 8.0)]
        );
        assert_eq!(ink.metadata.get("id").map(String::as_str), Some("a"));
    }

    #[test]
    fn parses_two_traces_and_annotation() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "expr.inkml",
            r#"<ink>
                 <annotation type="normalizedLabel">x+y</annotation>
                 <trace>0 0 0, 1 1 10</trace>
                 <trace>2 0 40, 3 1 50</trace>
               </ink>"#,
        );
        let ink = read_inkml(&path, &InkmlOptions::default()).unwrap();
        assert_eq!(ink.strokes.len(), 2);
        assert_eq!(ink.label.as_deref(), Some("x+y"));
    }

    #[test]
    fn selects_the_requested_annotation_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "b.inkml",
            r#"<ink>
                 <annotation type="raw">RAW</annotation>
                 <annotation type="normalizedLabel">clean</annotation>
                 <trace>0 0 0</trace>
               </ink>"#,
        );
        let opts = InkmlOptions {
            annotation_type: Some("normalizedLabel".to_string()),
        };
        let ink = read_inkml(&path, &opts).unwrap();
        assert_eq!(ink.label.as_deref(), Some("clean"));
        let first = read_inkml(&path, &InkmlOptions::default()).unwrap();
        assert_eq!(first.label.as_deref(), Some("RAW"));
    }

    #[test]
    fn non_numeric_token_names_the_trace() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "bad.inkml",
            r#"<ink><trace>0 0 abc</trace></ink>"#,
        );
        let err = read_inkml(&path, &InkmlOptions::default()).unwrap_err();
        assert!(
            matches!(&err, IngestError::Trace { trace: 0, message, .. }
                if message.contains("abc")),
            "got {err}"
        );
    }

    #[test]
    fn malformed_xml_reports_an_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(dir.path(), "broken.inkml", "<ink><trace>0 0 0</ink>");
        let err = read_inkml(&path, &InkmlOptions::default()).unwrap_err();
        assert!(
            matches!(err, IngestError::Xml { offset, .. } if offset > 0),
            "got {err}"
        );
    }

    #[test]
    fn full_inkml_features_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "brush.inkml",
            r#"<ink><brush xml:id="b1"/><trace>0 0 0</trace></ink>"#,
        );
        let err = read_inkml(&path, &InkmlOptions::default()).unwrap_err();
        assert!(
            matches!(&err, IngestError::UnsupportedInkml { element, .. } if element == "brush"),
            "got {err}"
        );
    }

    #[test]
    fn annotation_xml_subtree_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "meta.inkml",
            r#"<ink>
                 <annotationXML><symbol id="x"><inner>junk</inner></symbol></annotationXML>
                 <trace>1 2 0</trace>
               </ink>"#,
        );
        let ink = read_inkml(&path, &InkmlOptions::default()).unwrap();
        assert_eq!(ink.strokes.len(), 1);
        assert_eq!(ink.label, None);
    }

    #[test]
    fn trace_groups_flatten_in_document_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "grouped.inkml",
            r#"<ink>
                 <traceGroup>
                   <trace>0 0 0</trace>
                   <traceGroup><trace>1 0 10</trace></traceGroup>
                 </traceGroup>
                 <trace>2 0 20</trace>
               </ink>"#,
        );
        let ink = read_inkml(&path, &InkmlOptions::default()).unwrap();
        let xs: Vec<f64> = ink.strokes.iter().map(|s| s.points[0].x).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn timestamps_rebase_to_first_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(
            dir.path(),
            "abs.inkml",
            r#"<ink><trace>0 0 1000, 1 0 1010</trace></ink>"#,
        );
        let ink = read_inkml(&path, &InkmlOptions::default()).unwrap();
        assert_eq!(ink.strokes[0].points[0].t, 0.0);
        assert_eq!(ink.strokes[0].points[1].t, 10.0);
    }

    #[test]
    fn directory_reader_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["c.inkml", "a.inkml", "b.inkml"] {
            write_doc(dir.path(), name, r#"<ink><trace>0 0 0</trace></ink>"#);
        }
        let opts = InkmlOptions::default();
        let ids: Vec<String> = read_inkml_dir(dir.path(), &opts)
            .unwrap()
            .map(|(_, ink)| ink.unwrap().metadata["id"].clone())
            .collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }
}
