//! Published reference values the engine is checked against.

/// (layer kind, output shape without batch axis, parameter count) for the
/// depth-3 compound network.
pub const COMPOUND_ROWS: [(&str, &[usize], usize); 24] = [
    ("Conv2D", &[106, 106, 16], 448),
    ("Conv2D", &[104, 104, 16], 2320),
    ("Conv2D", &[102, 102, 16], 2320),
    ("MaxPooling2D", &[51, 51, 16], 0),
    ("Dropout", &[51, 51, 16], 0),
    ("Conv2D", &[49, 49, 32], 4640),
    ("Conv2D", &[47, 47, 32], 9248),
    ("Conv2D", &[45, 45, 32], 9248),
    ("MaxPooling2D", &[22, 22, 32], 0),
    ("Dropout", &[22, 22, 32], 0),
    ("Conv2D", &[20, 20, 64], 18496),
    ("Conv2D", &[18, 18, 64], 36928),
    ("Conv2D", &[16, 16, 64], 36928),
    ("MaxPooling2D", &[8, 8, 64], 0),
    ("Dropout", &[8, 8, 64], 0),
    ("Conv2D", &[6, 6, 128], 73856),
    ("Conv2D", &[4, 4, 128], 147584),
    ("Conv2D", &[2, 2, 128], 147584),
    ("MaxPooling2D", &[1, 1, 128], 0),
    ("Dropout", &[1, 1, 128], 0),
    ("Flatten", &[128], 0),
    ("Dense", &[256], 33024),
    ("Dropout", &[256], 0),
    ("Dense", &[2], 514),
];

pub const COMPOUND_TOTAL: usize = 523_138;

/// The printed baseline listing. It skips rows and is not a valid chain on
/// its own (a 2x2 pool of 106 is 53, not 51).
pub const BASELINE_LISTING: [(&str, &[usize], usize); 10] = [
    ("Conv2D", &[106, 106, 16], 448),
    ("MaxPooling2D", &[51, 51, 16], 0),
    ("Conv2D", &[45, 45, 32], 9248),
    ("MaxPooling2D", &[22, 22, 32], 0),
    ("Dropout", &[22, 22, 32], 0),
    ("Conv2D", &[2, 2, 128], 147584),
    ("MaxPooling2D", &[1, 1, 128], 0),
    ("Flatten", &[128], 0),
    ("Dense", &[256], 33024),
    ("Dense", &[2], 514),
];

pub struct Arm {
    pub name: &'static str,
    /// Rows are the true class (benign, malignant), columns the prediction.
    pub counts: [[u64; 2]; 2],
    /// Precision, recall, F1 in hundredths, for benign then malignant.
    pub scores: [[u32; 3]; 2],
}

pub const ARMS: [Arm; 5] = [
    Arm { name: "baseline", counts: [[7609, 391], [693, 7307]], scores: [[92, 95, 93], [95, 91, 93]] },
    Arm { name: "resolution", counts: [[7634, 366], [538, 7462]], scores: [[93, 95, 94], [95, 93, 94]] },
    Arm { name: "depth", counts: [[7563, 437], [461, 7539]], scores: [[94, 95, 94], [95, 94, 94]] },
    Arm { name: "width", counts: [[7561, 439], [605, 7395]], scores: [[94, 94, 94], [94, 94, 94]] },
    Arm { name: "compound", counts: [[7440, 560], [585, 7415]], scores: [[93, 93, 93], [93, 93, 93]] },
];

/// Round half up to hundredths, as an integer.
pub fn hundredths(v: f64) -> u32 {
    // the small nudge keeps exact x.xx5 ratios from falling below the midpoint
    (v * 100.0 + 0.5 + 1e-9).floor() as u32
}
