"""The fixed four-star acceptability rubric, served to raters verbatim."""

STAR_SCALE = {
    1: "The segmentation is completely incorrect/not in the right location.",
    2: "The segmentation is in the correct location but requires significant modifications.",
    3: "The segmentation is in the correct location but needs minor adjustments.",
    4: "The segmentation is clinically usable and perfect.",
}

MIN_STARS = 1
MAX_STARS = 4
