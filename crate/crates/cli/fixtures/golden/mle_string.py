x = 'x' * (1 << 31)
print(len(x))
