from pnnflow.systems.base import (
    BracketReport,
    SystemSpec,
    check_poisson_bracket,
    eval_field,
    from_canonical,
    to_canonical,
)
from pnnflow.systems.catalog import SYSTEMS, get_system
from pnnflow.systems.integrate import (
    IntegratorSettings,
    generate_dataset,
    generate_trajectory,
    reference_trajectory,
)
from pnnflow.systems.render import PixelMovie, flatten_movie, render_two_body, unflatten_movie
