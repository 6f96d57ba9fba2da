s = 0
for i in range(10 ** 10):
    s += i
print(s)
