"""
Display functionality for terminal output
"""

import math
from typing import Any, Dict, List, Sequence

from .utils import Colors as C, format_count, get_terminal_width, truncate_text


class Display:
    """Handle terminal display and formatting"""

    # (key, title, width, format)
    UPDATE_COLUMNS = [
        ('update', 'UPD', 5, 'd'),
        ('frames', 'FRAMES', 7, 'count'),
        ('ext_reward', 'EXT', 8, '.4f'),
        ('int_reward_norm', 'INT', 8, '.4f'),
        ('ep_return', 'RETURN', 7, '.3f'),
        ('goal_hits', 'GOALS', 6, 'd'),
        ('entropy', 'ENTROPY', 7, '.3f'),
        ('approx_kl', 'KL', 8, '.5f'),
        ('clipfrac', 'CLIP', 6, '.3f'),
        ('visited_states', 'VISITED', 7, 'd'),
        ('noisy_frac', 'NOISY', 6, '.3f'),
    ]

    def __init__(self):
        self.term_width = get_terminal_width()
        total = 0
        self.columns = []
        for column in self.UPDATE_COLUMNS:
            total += column[2] + 3
            if total > self.term_width and self.columns:
                break
            self.columns.append(column)

    def rule(self, char: str = '═') -> str:
        """Horizontal rule sized to the terminal"""
        return f"{C.G}{char * min(self.term_width - 2, 120)}{C.X}"

    def show_banner(self, title: str = ''):
        """Display the application banner"""
        banner = f"""
{C.M}╔════════════════════════════════════════════════════════════╗
║   ██████╗ ███╗   ██╗██████╗     ██████╗ ███████╗███████╗██╗  ██╗ ║
║   ██╔══██╗████╗  ██║██╔══██╗    ██╔══██╗██╔════╝██╔════╝██║ ██╔╝ ║
║   ██████╔╝██╔██╗ ██║██║  ██║    ██║  ██║█████╗  ███████╗█████╔╝  ║
║   ██╔══██╗██║╚██╗██║██║  ██║    ██║  ██║██╔══╝  ╚════██║██╔═██╗  ║
║   ██║  ██║██║ ╚████║██████╔╝    ██████╔╝███████╗███████║██║  ██╗ ║
║   ╚═╝  ╚═╝╚═╝  ╚═══╝╚═════╝     ╚═════╝ ╚══════╝╚══════╝╚═╝  ╚═╝ ║
║  [RANDOM NETWORK DISTILLATION. DESK SCALE.]                    ║
╚════════════════════════════════════════════════════════════╝{C.X}"""
        print(banner)
        if title:
            print(f"{C.C}{truncate_text(title, self.term_width - 2)}{C.X}")

    def show_update_header(self):
        """Column titles for the per-update table"""
        header = " │ ".join(f"{C.B}{C.C}{title:>{width}}{C.X}" for _, title, width, _ in self.columns)
        print(self.rule())
        print(header)
        print(self.rule())

    def _cell(self, value: Any, width: int, fmt: str) -> str:
        if fmt == 'count':
            return f"{format_count(value):>{width}}"
        if fmt == 'd':
            return f"{int(value):>{width}d}"
        if isinstance(value, float) and not math.isfinite(value):
            return f"{C.R}{str(value):>{width}}{C.X}"
        return f"{value:>{width}{fmt}}"

    def show_update_row(self, row: Dict[str, Any]):
        """One table row per PPO update"""
        cells = []
        for key, _, width, fmt in self.columns:
            cell = self._cell(row[key], width, fmt)
            if key == 'goal_hits' and row[key] > 0:
                cell = f"{C.Y}{cell}{C.X}"
            cells.append(cell)
        print(" │ ".join(cells))

    def show_training_summary(self, rows: List[Dict[str, Any]], out_dir: Any = None):
        """Closing line with totals from the last row"""
        if not rows:
            print(f"{C.R}No updates were run{C.X}")
            return
        last = rows[-1]
        print(self.rule())
        print(f"{C.G}[DONE]{C.X} {last['update']} updates, {format_count(last['frames'])} frames, "
              f"{last['visited_states']} states visited, goal reached {last['goal_hits']} times")
        if out_dir is not None:
            print(f"{C.D}Outputs in {out_dir}{C.X}")

    def show_curves(self, curves: Sequence[Any]):
        """Held-out MSE per n, one column per seed"""
        if not curves:
            print(f"{C.R}No curves{C.X}")
            return
        seeds = [curve.seed for curve in curves]
        print(self.rule())
        print(f"{C.B}{C.C}{'n':>6}{C.X} │ " + " │ ".join(f"{C.B}{C.C}{'seed ' + str(s):>11}{C.X}" for s in seeds))
        print(self.rule())
        for i, n in enumerate(curves[0].n_values):
            print(f"{n:>6} │ " + " │ ".join(f"{curve.mse[i]:>11.5f}" for curve in curves))
        print(self.rule())

    def show_noisytv(self, report: Dict[str, Any]):
        """Noisy vs matched tile error per seed and bonus, then agent occupancy"""
        print(self.rule())
        print(f"{C.B}{C.C}{'SEED':>4} │ {'BONUS':<9} │ {'NOISY':>10} │ {'MATCHED':>10} │ {'RATIO':>8} │ {'STEPS':>6}{C.X}")
        print(self.rule())
        for record in report['seeds']:
            for kind in ('rnd', 'dynamics'):
                entry = record[kind]
                steps = f"{format_count(entry['train_steps']):>6}"
                if not entry['converged']:
                    steps = f"{C.Y}{steps}{C.X}"
                print(f"{record['seed']:>4} │ {kind:<9} │ {entry['noisy']:>10.5f} │ "
                      f"{entry['deterministic']:>10.5f} │ {entry['ratio']:>8.2f} │ {steps}")
        print(self.rule())
        if report.get('occupancy'):
            print(f"{C.B}{C.C}{'SEED':>4} │ {'RND OCC':>9} │ {'DYN OCC':>9}{C.X}")
            for entry in report['occupancy']:
                print(f"{entry['seed']:>4} │ {entry['rnd']:>9.3f} │ {entry['dynamics']:>9.3f}")
            print(f"{C.D}dynamics agent stayed longer in {report['occupancy_wins']} seeds "
                  f"(need {report['min_occupancy_wins']}){C.X}")
            print(self.rule())

    def show_check(self, report: Any):
        """Per-seed lines, then the verdict"""
        for line in report.lines:
            print(f"  {line}")
        if report.passed:
            print(f"{C.G}[PASS]{C.X} {report.source}")
        else:
            print(f"{C.R}[FAIL]{C.X} {report.source}")

    def show_error(self, category: str, message: str):
        """Show a typed error"""
        print(f"{C.R}[ERROR]{C.X} {category}: {message}")

    def show_interrupted(self):
        """Show the Ctrl-C notice"""
        print(f"\n{C.Y}[INTERRUPTED]{C.X}")
