import json
import os
from typing import List, Optional, Tuple

from loguru import logger

from services.errors import ParameterError
from storage.models import GroupIndex, RunConfig

GRID_FILE = "data/grid.json"


def load_grid_from_json(path: Optional[str] = None) -> List[Tuple[int, str]]:
    """Загрузить сетку параметров (q, α) из JSON файла"""
    grid_file = path or GRID_FILE

    if not os.path.exists(grid_file):
        raise ParameterError(f"Файл сетки {grid_file} не найден")

    try:
        with open(grid_file, 'r', encoding='utf-8') as f:
            grid_data = json.load(f)

        grid: List[Tuple[int, str]] = []
        for entry in grid_data:
            group = GroupIndex(int(entry["q"]))
            for alpha in entry["alphas"]:
                # валидация токена α, как для командной строки
                RunConfig(q=group.q, alpha=alpha)
                grid.append((group.q, alpha))

        logger.info(f"Загружено {len(grid)} пар (q, α) из {grid_file}")
        return grid

    except (KeyError, TypeError, ValueError) as e:
        logger.error(f"Ошибка при загрузке сетки: {e}")
        raise ParameterError(f"некорректный файл сетки {grid_file}: {e}") from e
