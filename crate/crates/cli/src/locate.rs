//! Maps positions inside a JSON document back to source lines.

/// 1-based line of the `index`-th element of the array stored under the
/// top-level key `key`, or `None` if the document does not have that shape.
pub fn element_line(text: &str, key: &str, index: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let start = top_level_value(bytes, key)?;
    if bytes.get(start) != Some(&b'[') {
        return None;
    }
    let mut pos = start + 1;
    let mut k = 0;
    loop {
        pos = skip_ws(bytes, pos);
        match bytes.get(pos)? {
            b']' => return None,
            b',' => {
                pos += 1;
                continue;
            }
            _ => {}
        }
        if k == index {
            return Some(line_of(bytes, pos));
        }
        pos = skip_value(bytes, pos)?;
        k += 1;
    }
}

/// 1-based line of the `inner`-th element of the `outer`-th element of the
/// array under `key`.
pub fn nested_element_line(text: &str, key: &str, outer: usize, inner: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let start = top_level_value(bytes, key)?;
    let mut pos = skip_ws(bytes, start + 1);
    let mut k = 0;
    while k < outer {
        pos = skip_value(bytes, pos)?;
        pos = skip_ws(bytes, pos);
        if bytes.get(pos) != Some(&b',') {
            return None;
        }
        pos = skip_ws(bytes, pos + 1);
        k += 1;
    }
    if bytes.get(pos) != Some(&b'[') {
        return Some(line_of(bytes, pos));
    }
    pos = skip_ws(bytes, pos + 1);
    for _ in 0..inner {
        pos = skip_value(bytes, pos)?;
        pos = skip_ws(bytes, pos);
        if bytes.get(pos) != Some(&b',') {
            return None;
        }
        pos = skip_ws(bytes, pos + 1);
    }
    Some(line_of(bytes, pos))
}

fn line_of(bytes: &[u8], pos: usize) -> usize {
    1 + bytes[..pos].iter().filter(|&&b| b == b'\n').count()
}

fn skip_ws(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

fn skip_string(bytes: &[u8], mut pos: usize) -> Option<usize> {
    pos += 1;
    while pos < bytes.len() {
        match bytes[pos] {
            b'\\' => pos += 2,
            b'"' => return Some(pos + 1),
            _ => pos += 1,
        }
    }
    None
}

/// Position just past the value starting at `pos`.
fn skip_value(bytes: &[u8], pos: usize) -> Option<usize> {
    match bytes.get(pos)? {
        b'"' => skip_string(bytes, pos),
        b'[' | b'{' => {
            let mut depth = 0usize;
            let mut p = pos;
            while p < bytes.len() {
                match bytes[p] {
                    b'"' => {
                        p = skip_string(bytes, p)?;
                        continue;
                    }
                    b'[' | b'{' => depth += 1,
                    b']' | b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some(p + 1);
                        }
                    }
                    _ => {}
                }
                p += 1;
            }
            None
        }
        _ => {
            let mut p = pos;
            while p < bytes.len() && !matches!(bytes[p], b',' | b']' | b'}') && !bytes[p].is_ascii_whitespace() {
                p += 1;
            }
            Some(p)
        }
    }
}

/// Start of the value of `key` in the top-level object.
fn top_level_value(bytes: &[u8], key: &str) -> Option<usize> {
    let mut pos = skip_ws(bytes, 0);
    if bytes.get(pos) != Some(&b'{') {
        return None;
    }
    pos += 1;
    loop {
        pos = skip_ws(bytes, pos);
        match bytes.get(pos)? {
            b'}' => return None,
            b',' => {
                pos += 1;
                continue;
            }
            b'"' => {}
            _ => return None,
        }
        let end = skip_string(bytes, pos)?;
        let name = &bytes[pos + 1..end - 1];
        pos = skip_ws(bytes, end);
        if bytes.get(pos) != Some(&b':') {
            return None;
        }
        pos = skip_ws(bytes, pos + 1);
        if name == key.as_bytes() {
            return Some(pos);
        }
        pos = skip_value(bytes, pos)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
  "note": "a [tricky] \"string\" {",
  "nodes": [
    {"id": 0, "parent": null},
    {"id": 1,
     "parent": 0},
    {"id": 2, "parent": 0}
  ],
  "lambda": [[0.1, 0.2],
             [0.3, 0.4]]
}"#;

    #[test]
    fn finds_array_elements() {
        assert_eq!(element_line(DOC, "nodes", 0), Some(4));
        assert_eq!(element_line(DOC, "nodes", 1), Some(5));
        assert_eq!(element_line(DOC, "nodes", 2), Some(7));
        assert_eq!(element_line(DOC, "nodes", 3), None);
        assert_eq!(element_line(DOC, "missing", 0), None);
    }

    #[test]
    fn finds_nested_elements() {
        assert_eq!(nested_element_line(DOC, "lambda", 0, 1), Some(9));
        assert_eq!(nested_element_line(DOC, "lambda", 1, 0), Some(10));
    }
}
