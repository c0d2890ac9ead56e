"""Causal-factor vocabulary for the three lane-change stages.

Stage 1 is the 2 s window before lateral motion starts, stage 2 runs from
onset to insertion into the target lane. Names follow the
``<vehicle>_<signal><stage>`` convention; ``d_a_b`` entries are gaps.
"""

STAGE1_FACTORS = (
    "lc_vx1", "lc_vy1", "lc_ax1", "lc_ay1",
    "fo_vx1", "fo_vy1", "fo_ax1", "fo_ay1",
    "d_lc_fo1",
    "ft_vx1", "ft_vy1", "ft_ax1", "ft_ay1",
    "bt_vx1", "bt_vy1", "bt_ax1", "bt_ay1",
    "d_lc_ftx1", "d_lc_fty1", "d_lc_btx1", "d_lc_bty1",
    "d_ft_bt1",
)

STAGE2_FACTORS = (
    "lc_vx2", "lc_vy2", "lc_ax2", "lc_ay2",
    "fo_vx2", "fo_vy2",
    "d_lc_fo2",
    "ft_vx2", "ft_vy2", "ft_ax2", "ft_ay2",
    "bt_vx2", "bt_vy2", "bt_ax2", "bt_ay2",
    "d_lc_ftx2", "d_lc_fty2", "d_lc_btx2", "d_lc_bty2",
    "d_ft_bt2",
)

OUTCOME = "Y"

# Default conditioner per treatment.
TREATMENT_CONDITIONERS = {
    "lc_vx2": "d_ft_bt2",
    "lc_vy2": "d_lc_bty2",
    "ft_vx2": "d_lc_ftx2",
    "ft_vy2": "d_lc_fty2",
    "bt_vx2": "d_lc_btx2",
    "bt_vy2": "d_lc_bty2",
    "fo_vx2": "d_lc_fo2",
    "fo_vy2": "d_lc_fo2",
}

SPEED_TREATMENTS = tuple(TREATMENT_CONDITIONERS)


def factors_for_stage(stage):
    if stage == 1:
        return STAGE1_FACTORS
    if stage == 2:
        return STAGE2_FACTORS
    raise ValueError(f"stage must be 1 or 2, got {stage!r}")
