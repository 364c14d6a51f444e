"""Численные сервисы лаборатории: спектр, хаосы, симулятор, анализ."""
