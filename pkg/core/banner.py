"""
Banner Module - Startup panel for the command line
"""

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.text import Text

from core import __version__

console = Console()


def display_banner():
    """Display the twingauge banner"""
    logo = r"""
     _            _
    | |___ __ __ (_)_ _  __ _ __ _ _  _ __ _ ___
    |  _\ V  V / | | ' \/ _` / _` | || / _` / -_)
     \__|\_/\_/  |_|_||_\__, \__,_|\_,_\__, \___|
                        |___/          |___/
    """

    banner_text = Text()
    banner_text.append(logo, style="bold cyan")
    banner_text.append("\n")
    banner_text.append("    Kaczmarz sweeps with twin error gauges\n", style="bold white")
    banner_text.append("    Twin | Mutual-Step | UPRE | GCV | CDP | Oracle\n", style="bold white")
    banner_text.append("\n")
    banner_text.append("    Version : ", style="bold green")
    banner_text.append(f"v{__version__}\n", style="white")

    panel = Panel(
        banner_text,
        box=box.DOUBLE,
        border_style="bold cyan",
        padding=(1, 2)
    )

    console.print(panel)
    console.print()
