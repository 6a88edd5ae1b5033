//! Class names and region groupings for evaluation.

use tanhpolar::metrics::RegionGroups;

/// The 11-class face parsing label set.
pub const FACE11: [&str; 11] = [
    "background",
    "skin",
    "l_brow",
    "r_brow",
    "l_eye",
    "r_eye",
    "nose",
    "u_lip",
    "l_lip",
    "mouth",
    "hair",
];

/// Named groups for the 11-class set: brows, eyes, lips and inner mouth
/// merge into one inner-parts region; skin and hair stand alone.
pub const FACE11_GROUPS: &str = "inner_parts=2,3,4,5,7,8,9;skin=1;hair=10";

/// `face11`, a comma-separated list, or empty for `class<i>` names.
pub fn parse_names(spec: Option<&str>, classes: usize) -> Result<Vec<String>, String> {
    let names: Vec<String> = match spec.map(str::trim) {
        None | Some("") => (0..classes).map(|i| format!("class{i}")).collect(),
        Some("face11") => FACE11.iter().map(|s| s.to_string()).collect(),
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
    };
    if names.len() != classes {
        return Err(format!("{} class names for {classes} classes", names.len()));
    }
    if let Some(bad) = names.iter().find(|n| n.is_empty() || n.contains(['=', '.', ' '])) {
        return Err(format!("class name {bad:?} must be non-empty without '=', '.' or spaces"));
    }
    Ok(names)
}

/// `face11` or `name=i,j,...;name=...`.
pub fn parse_groups(spec: &str, classes: usize) -> Result<(Vec<String>, RegionGroups), String> {
    let spec = if spec.trim() == "face11" { FACE11_GROUPS } else { spec };
    let mut names = Vec::new();
    let mut groups = Vec::new();
    for entry in spec.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (name, members) = entry
            .split_once('=')
            .ok_or_else(|| format!("group {entry:?} is not name=i,j,..."))?;
        let members = members
            .split(',')
            .map(|m| m.trim().parse::<u8>().map_err(|_| format!("bad class index {m:?} in group {name}")))
            .collect::<Result<Vec<_>, _>>()?;
        names.push(name.trim().to_string());
        groups.push(members);
    }
    let groups = RegionGroups::new(classes, groups).map_err(|e| e.to_string())?;
    Ok((names, groups))
}
