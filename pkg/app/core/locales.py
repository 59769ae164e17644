# app/core/locales.py

# Сообщения об ошибках сетки и областей
ERROR_GRID_DIM = "Размерность сетки должна быть 1 или 2, получено: {dim}."
ERROR_GRID_HALF_WIDTH = "Полуширина области должна быть положительной, получено: {half_width}."
ERROR_GRID_NODES = "Число узлов на ось должно быть не меньше 8, получено: {nodes}."
ERROR_GRID_MISMATCH = "Сеточные функции заданы на разных сетках."
ERROR_NON_FINITE_VALUES = "Сеточная функция содержит нечисловые значения (NaN или бесконечность)."
ERROR_VALUES_SHAPE = "Ожидалось {expected} значений, получено: {actual}."
ERROR_BOX_SHAPE = "Прямоугольник области '{name}' должен иметь {expected} чисел, получено: {actual}."
ERROR_BOX_ORDER = "В прямоугольнике области '{name}' нижняя граница не меньше верхней."
ERROR_REGION_EMPTY = "Область '{name}' не содержит ни одного узла сетки."
ERROR_REGION_OVERLAP = "Области '{first}' и '{second}' пересекаются после растеризации."
ERROR_REGION_NOT_EXTERIOR = "Область '{name}' должна лежать во внешности Ω."
ERROR_REGION_GAP = "Между областями '{first}' и '{second}' нет зазора хотя бы в одну ячейку."
ERROR_UNKNOWN_REGION = "Неизвестная область: '{name}'."

# Ядро и квадратуры
ERROR_FRACTIONAL_ORDER = "Порядок s должен лежать в (0, {upper}), получено: {s}."
ERROR_MOLLIFIER_RADIUS = "Радиус сглаживания {radius} меньше шага сетки {spacing}."

# Проводимость
ERROR_CONDUCTIVITY_NOT_POSITIVE = "Проводимость должна быть строго положительной (минимум {minimum})."
ERROR_CONDUCTIVITY_FRAME = "Проводимость должна равняться 1 на внешнем кольце ячеек (отклонение {deviation})."
ERROR_CONDUCTIVITY_WINDOW_MISMATCH = "Проводимости не совпадают в окне '{window}' (отклонение {deviation})."
ERROR_UNKNOWN_RECIPE = "Неизвестный рецепт проводимости: '{recipe}'."

# Решатели
ERROR_UNKNOWN_FORM = "Неизвестный тип формы: '{tag}'."
ERROR_UNKNOWN_METHOD = "Неизвестный метод решения: '{method}'."
ERROR_INDEFINITE_FORM = "Внутренний блок формы '{tag}' не является положительно определённым."
ERROR_CG_NOT_CONVERGED = "Метод сопряжённых градиентов не сошёлся за {maxiter} итераций (невязка {residual:.3e})."
ERROR_EIGEN_NOT_CONVERGED = "Обратные степенные итерации не сошлись за {maxiter} шагов."
ERROR_EXTERIOR_DATA_IN_OMEGA = "Внешние данные должны обращаться в ноль на узлах Ω."
ERROR_WINDOW_TOUCHES_OMEGA = "Носитель внешних данных касается Ω: требуется зазор хотя бы в одну ячейку."
ERROR_GRAM_NOT_SPD = "Матрица Грама на внешних узлах не является положительно определённой."

# DN-отображение
ERROR_LAYOUT_MISMATCH = "DN-матрицы построены для разных разбиений или сеток."
ERROR_WINDOW_OUTSIDE_BLOCK = "Окно '{window}' выходит за пределы узлов блока DN-матрицы."
ERROR_POLARIZATION_CUTOFF = "Срезающая функция φ должна равняться 1 на носителе f."

# Внешняя реконструкция
ERROR_BALL_ESCAPES_WINDOW = "Шар радиуса {radius} вокруг x0 выходит за пределы окна '{window}'."
ERROR_RADIUS_UNDER_RESOLVED = "Радиус {radius} меньше 4h = {limit}: уровень {level} не разрешается сеткой."
ERROR_SUPPORT_OUTSIDE_WINDOW = "Носитель функции выходит за пределы окна '{window}'."

# Контрпример
ERROR_COUNTEREXAMPLE_RANGE = "Для контрпримера требуется 0 < s < {upper}, получено: {s}."
ERROR_CUTOFF_GEOMETRY = "Носитель срезающей функции нарушает геометрию: {reason}."
ERROR_CUTOFF_MODE = "Неизвестный режим построения контрпримера: '{mode}'."

# Конфигурация и хранилище
ERROR_CONFIG_FILE_NOT_FOUND = "Файл конфигурации не найден: {path}."
ERROR_CONFIG_SYNTAX = "Синтаксическая ошибка конфигурации: {reason}."
ERROR_CONFIG_INVALID = "Конфигурация содержит ошибки:\n{details}"
ERROR_UNKNOWN_EXPERIMENT = "Неизвестный эксперимент: '{name}'."
ERROR_STORAGE_FORMAT = "Файл '{path}' имеет неверный формат: {reason}."

# Сообщения об успехе
SUCCESS_ALL_CRITERIA_PASSED = "Все критерии выполнены."
FAILURE_CRITERIA = "Не выполнены критерии: {names}."
