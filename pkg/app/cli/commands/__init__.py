"""命令组：analysis / model / training"""
